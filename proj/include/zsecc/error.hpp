// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zsecc {

// Base of every error raised by the library. kind() is a stable tag used in
// the CLI's machine-readable error line.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ConfigError"; }
};

class ArgumentError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ArgumentError"; }
};

class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ParseError"; }
};

// Model file problems: bad magic, CRC mismatch, truncation, unknown version.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "FormatError"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "IoError"; }
};

// A weight at a non-eighth block position lies outside [-64, 63].
class ConstraintViolation : public Error {
public:
    static constexpr std::size_t kNoLayer = static_cast<std::size_t>(-1);

    explicit ConstraintViolation(std::size_t index, std::size_t layer = kNoLayer)
        : Error("ConstraintViolation(" + std::to_string(index) + ")" +
                (layer == kNoLayer ? std::string() : " in layer " + std::to_string(layer))),
          index_(index),
          layer_(layer) {}
    const char* kind() const noexcept override { return "ConstraintViolation"; }
    // Flat weight index within the tensor.
    std::size_t index() const noexcept { return index_; }
    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t index_;
    std::size_t layer_;
};

}  // namespace zsecc
