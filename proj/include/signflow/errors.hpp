#pragma once

#include <stdexcept>
#include <string>

namespace signflow {

/// Root of every error the toolkit throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, records, tensors on disk).
/// The CLI maps this family to exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

class LayoutError : public DataError {
public:
    LayoutError(std::string group, const std::string& what)
        : DataError(what), group_(std::move(group)) {}
    const std::string& group() const noexcept { return group_; }

private:
    std::string group_;
};

enum class DecodeFault { BadMagic, VersionMismatch, Truncated, DimMismatch, Malformed };

class DecodeError : public DataError {
public:
    DecodeError(DecodeFault fault, const std::string& what) : DataError(what), fault_(fault) {}
    DecodeFault fault() const noexcept { return fault_; }

private:
    DecodeFault fault_;
};

enum class ProtocolFault { BadLeadByte, DimMismatch, Truncated, NonFinite };

class ProtocolError : public DataError {
public:
    ProtocolError(ProtocolFault fault, const std::string& what) : DataError(what), fault_(fault) {}
    ProtocolFault fault() const noexcept { return fault_; }

private:
    ProtocolFault fault_;
};

class DatasetError : public DataError {
public:
    using DataError::DataError;
};

/// Tensor or layer shapes disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

class OptimizerError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, int batch, const std::string& what)
        : Error(what), epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

}  // namespace signflow
