#pragma once

#include <cstdint>
#include <exception>
#include <span>

namespace dfp::detail {

struct Truncated : std::exception {
    const char* what() const noexcept override { return "truncated"; }
};

/// Big-endian reader over a byte span. Every read past the end throws
/// Truncated, so protocol parsers never index out of bounds.
class ByteCursor {
public:
    explicit ByteCursor(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ >= data_.size(); }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u24() {
        need(3);
        const auto v = (std::uint32_t{data_[pos_]} << 16) | (std::uint32_t{data_[pos_ + 1]} << 8) | data_[pos_ + 2];
        pos_ += 3;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        const auto v = (std::uint32_t{data_[pos_]} << 24) | (std::uint32_t{data_[pos_ + 1]} << 16) |
                       (std::uint32_t{data_[pos_ + 2]} << 8) | data_[pos_ + 3];
        pos_ += 4;
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    void seek(std::size_t pos) {
        if (pos > data_.size()) throw Truncated{};
        pos_ = pos;
    }
    std::span<const std::uint8_t> rest() const { return data_.subspan(pos_); }
    std::span<const std::uint8_t> all() const { return data_; }

private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) throw Truncated{};
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace dfp::detail
