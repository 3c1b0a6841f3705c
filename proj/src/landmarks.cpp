#include "signflow/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "byte_io.hpp"
#include "signflow/errors.hpp"

namespace signflow {

namespace {

template <typename Point>
void write_group(const std::optional<std::vector<Point>>& group, std::size_t expected, const char* name,
                 std::span<float> out) {
    if (!group) return;  // already zero
    if (group->size() != expected) {
        throw LayoutError(name, std::string("landmark group '") + name + "' has " +
                                    std::to_string(group->size()) + " points, expected " +
                                    std::to_string(expected));
    }
    std::size_t k = 0;
    for (const auto& p : *group)
        for (float v : p) out[k++] = v;
}

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

FrameFeatures FrameFeatures::from_span(std::span<const float> values) {
    if (values.size() != kFeatureDim) {
        throw LayoutError("frame", "frame has " + std::to_string(values.size()) + " values, expected " +
                                       std::to_string(kFeatureDim));
    }
    if (!all_finite(values)) throw LayoutError("frame", "frame contains a non-finite value");
    FrameFeatures f;
    std::copy(values.begin(), values.end(), f.values_.begin());
    return f;
}

GestureSequence::GestureSequence(std::size_t dim, std::vector<float> data, std::optional<std::string> label)
    : dim_(dim), data_(std::move(data)), label_(std::move(label)) {
    if (dim_ == 0 || data_.size() % dim_ != 0)
        throw ShapeError("sequence data size " + std::to_string(data_.size()) + " is not a multiple of dim " +
                         std::to_string(dim_));
}

void GestureSequence::append(std::span<const float> frame) {
    if (frame.size() != dim_)
        throw ShapeError("frame dim " + std::to_string(frame.size()) + " does not match sequence dim " +
                         std::to_string(dim_));
    data_.insert(data_.end(), frame.begin(), frame.end());
}

bool GestureSequence::same_frames(const GestureSequence& other) const {
    if (dim_ != other.dim_ || data_.size() != other.data_.size()) return false;
    return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

FrameFeatures flatten_frame(const LandmarkFrame& frame) {
    FrameFeatures out;
    auto v = out.values();
    write_group(frame.pose, kPosePoints, "pose", v.subspan(kPoseOffset, kFaceOffset - kPoseOffset));
    write_group(frame.face, kFacePoints, "face", v.subspan(kFaceOffset, kLeftHandOffset - kFaceOffset));
    write_group(frame.left_hand, kHandPoints, "left_hand",
                v.subspan(kLeftHandOffset, kRightHandOffset - kLeftHandOffset));
    write_group(frame.right_hand, kHandPoints, "right_hand",
                v.subspan(kRightHandOffset, kFeatureDim - kRightHandOffset));
    return out;
}

std::vector<std::uint8_t> encode_sequence(const GestureSequence& seq) {
    std::vector<std::uint8_t> out;
    out.reserve(kSequenceHeaderBytes + seq.data().size() * 4);
    out.insert(out.end(), kSequenceMagic.begin(), kSequenceMagic.end());
    detail::put_u16(out, kSequenceVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(seq.dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(seq.frame_count()));
    for (float v : seq.data()) detail::put_f32(out, v);
    return out;
}

GestureSequence decode_sequence(std::span<const std::uint8_t> bytes, std::optional<std::size_t> expected_dim) {
    if (bytes.size() < 4 || !std::equal(kSequenceMagic.begin(), kSequenceMagic.end(), bytes.begin()))
        throw DecodeError(DecodeFault::BadMagic, "not an LMK1 file (bad magic)");
    if (bytes.size() < kSequenceHeaderBytes) throw DecodeError(DecodeFault::Truncated, "truncated LMK1 header");
    const auto version = detail::get_u16(bytes, 4);
    if (version != kSequenceVersion)
        throw DecodeError(DecodeFault::VersionMismatch, "unsupported LMK1 version " + std::to_string(version));
    const std::size_t dim = detail::get_u32(bytes, 6);
    const std::size_t frames = detail::get_u32(bytes, 10);
    if (dim == 0) throw DecodeError(DecodeFault::Malformed, "LMK1 feature_dim is zero");
    if (expected_dim && dim != *expected_dim)
        throw DecodeError(DecodeFault::DimMismatch, "LMK1 feature_dim " + std::to_string(dim) + " != expected " +
                                                        std::to_string(*expected_dim));
    const std::size_t payload = frames * dim * 4;
    if (bytes.size() - kSequenceHeaderBytes < payload)
        throw DecodeError(DecodeFault::Truncated, "truncated LMK1 payload: " +
                                                      std::to_string(bytes.size() - kSequenceHeaderBytes) +
                                                      " of " + std::to_string(payload) + " bytes");
    if (bytes.size() - kSequenceHeaderBytes > payload)
        throw DecodeError(DecodeFault::Malformed, "trailing bytes after LMK1 payload");
    std::vector<float> data(frames * dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = detail::get_f32(bytes, kSequenceHeaderBytes + 4 * i);
        if (!std::isfinite(data[i])) throw DecodeError(DecodeFault::Malformed, "non-finite value in LMK1 payload");
    }
    return GestureSequence(dim, std::move(data));
}

GestureSequence read_sequence_file(const std::string& path, std::optional<std::size_t> expected_dim) {
    const auto bytes = detail::read_file_bytes(path);
    try {
        return decode_sequence(bytes, expected_dim);
    } catch (const DecodeError& e) {
        throw DecodeError(e.fault(), path + ": " + e.what());
    }
}

void write_sequence_file(const std::string& path, const GestureSequence& seq) {
    detail::write_file_bytes(path, encode_sequence(seq));
}

std::vector<std::uint8_t> encode_frame(const FrameFeatures& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(kFrameRecordBytes);
    out.push_back(kFrameLeadByte);
    detail::put_u32(out, static_cast<std::uint32_t>(kFeatureDim));
    for (float v : frame.values()) detail::put_f32(out, v);
    return out;
}

FrameFeatures decode_frame(std::span<const std::uint8_t> record) {
    if (record.empty()) throw ProtocolError(ProtocolFault::Truncated, "empty frame record");
    if (record[0] != kFrameLeadByte)
        throw ProtocolError(ProtocolFault::BadLeadByte, "frame record does not start with 0x4C");
    if (record.size() < 5) throw ProtocolError(ProtocolFault::Truncated, "truncated frame record header");
    const std::size_t dim = detail::get_u32(record, 1);
    if (dim != kFeatureDim)
        throw ProtocolError(ProtocolFault::DimMismatch, "incompatible producer: frame dim " + std::to_string(dim) +
                                                            ", expected " + std::to_string(kFeatureDim));
    if (record.size() != kFrameRecordBytes)
        throw ProtocolError(ProtocolFault::Truncated, "frame record has " + std::to_string(record.size()) +
                                                          " bytes, expected " + std::to_string(kFrameRecordBytes));
    FrameFeatures f;
    auto v = f.values();
    for (std::size_t i = 0; i < kFeatureDim; ++i) v[i] = detail::get_f32(record, 5 + 4 * i);
    if (!std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); }))
        throw ProtocolError(ProtocolFault::NonFinite, "frame record contains a non-finite value");
    return f;
}

}  // namespace signflow

namespace signflow {

std::optional<FrameFeatures> read_frame_record(std::istream& in) {
    std::vector<std::uint8_t> record(5);
    in.read(reinterpret_cast<char*>(record.data()), 1);
    if (in.gcount() == 0) return std::nullopt;
    if (record[0] != kFrameLeadByte)
        throw ProtocolError(ProtocolFault::BadLeadByte, "frame record does not start with 0x4C");
    in.read(reinterpret_cast<char*>(record.data() + 1), 4);
    if (in.gcount() != 4) throw ProtocolError(ProtocolFault::Truncated, "stream ended inside a frame header");
    const std::size_t dim = detail::get_u32(record, 1);
    if (dim != kFeatureDim)
        throw ProtocolError(ProtocolFault::DimMismatch, "incompatible producer: frame dim " + std::to_string(dim) +
                                                            ", expected " + std::to_string(kFeatureDim));
    record.resize(kFrameRecordBytes);
    const auto payload = static_cast<std::streamsize>(kFrameRecordBytes - 5);
    in.read(reinterpret_cast<char*>(record.data() + 5), payload);
    if (in.gcount() != payload) throw ProtocolError(ProtocolFault::Truncated, "stream ended inside a frame payload");
    return decode_frame(record);
}

}  // namespace signflow
