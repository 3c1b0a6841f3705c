#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace signflow {

inline constexpr std::size_t kPosePoints = 33;
inline constexpr std::size_t kFacePoints = 468;
inline constexpr std::size_t kHandPoints = 21;

// Flattened block offsets: pose (x,y,z,visibility), face, left hand, right hand (x,y,z).
inline constexpr std::size_t kPoseOffset = 0;
inline constexpr std::size_t kFaceOffset = kPoseOffset + kPosePoints * 4;       // 132
inline constexpr std::size_t kLeftHandOffset = kFaceOffset + kFacePoints * 3;   // 1536
inline constexpr std::size_t kRightHandOffset = kLeftHandOffset + kHandPoints * 3;  // 1599
inline constexpr std::size_t kFeatureDim = kRightHandOffset + kHandPoints * 3;  // 1662

inline constexpr std::size_t kSequenceFrames = 30;

using Point3 = std::array<float, 3>;
using Point4 = std::array<float, 4>;

/// One tracker result. A group is empty when the tracker did not detect it.
struct LandmarkFrame {
    std::optional<std::vector<Point4>> pose;
    std::optional<std::vector<Point3>> face;
    std::optional<std::vector<Point3>> left_hand;
    std::optional<std::vector<Point3>> right_hand;
};

/// The fixed-width per-frame feature vector.
class FrameFeatures {
public:
    FrameFeatures() { values_.fill(0.0f); }

    /// Throws LayoutError if `values` is not 1662 finite floats.
    static FrameFeatures from_span(std::span<const float> values);

    std::span<const float> values() const noexcept { return values_; }
    std::span<float> values() noexcept { return values_; }
    float operator[](std::size_t i) const noexcept { return values_[i]; }
    static constexpr std::size_t size() noexcept { return kFeatureDim; }

    friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;

private:
    std::array<float, kFeatureDim> values_;
};

/// An ordered run of frames sharing one feature dimension, stored frame-major.
class GestureSequence {
public:
    explicit GestureSequence(std::size_t dim = kFeatureDim) : dim_(dim) {}
    GestureSequence(std::size_t dim, std::vector<float> data, std::optional<std::string> label = {});

    std::size_t dim() const noexcept { return dim_; }
    std::size_t frame_count() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::span<const float> frame(std::size_t t) const { return {data_.data() + t * dim_, dim_}; }
    std::span<const float> data() const noexcept { return data_; }

    void append(std::span<const float> frame);
    void append(const FrameFeatures& frame) { append(frame.values()); }

    const std::optional<std::string>& label() const noexcept { return label_; }
    void set_label(std::optional<std::string> label) { label_ = std::move(label); }

    /// Frame content equality; the label is not part of the persisted form.
    bool same_frames(const GestureSequence& other) const;

private:
    std::size_t dim_;
    std::vector<float> data_;
    std::optional<std::string> label_;
};

/// Packs the four groups in pose, face, left-hand, right-hand order; absent groups are zeros.
FrameFeatures flatten_frame(const LandmarkFrame& frame);

// LMK1 sequence files: "LMK1", u16 version, u32 feature_dim, u32 frame_count, f32 payload.
inline constexpr std::array<char, 4> kSequenceMagic{'L', 'M', 'K', '1'};
inline constexpr std::uint16_t kSequenceVersion = 1;
inline constexpr std::size_t kSequenceHeaderBytes = 14;

std::vector<std::uint8_t> encode_sequence(const GestureSequence& seq);

/// `expected_dim` of nullopt accepts whatever dimension the header declares.
GestureSequence decode_sequence(std::span<const std::uint8_t> bytes,
                                std::optional<std::size_t> expected_dim = kFeatureDim);

GestureSequence read_sequence_file(const std::string& path,
                                   std::optional<std::size_t> expected_dim = kFeatureDim);
void write_sequence_file(const std::string& path, const GestureSequence& seq);

// Frame stream records: 0x4C, u32 dim, dim f32.
inline constexpr std::uint8_t kFrameLeadByte = 0x4C;
inline constexpr std::size_t kFrameRecordBytes = 1 + 4 + kFeatureDim * 4;  // 6653

std::vector<std::uint8_t> encode_frame(const FrameFeatures& frame);
FrameFeatures decode_frame(std::span<const std::uint8_t> record);

}  // namespace signflow

#include <istream>

namespace signflow {

/// Reads one frame record. Returns nullopt on a clean end of stream (no bytes
/// of a new record); a partial record or a bad header throws ProtocolError.
std::optional<FrameFeatures> read_frame_record(std::istream& in);

}  // namespace signflow
