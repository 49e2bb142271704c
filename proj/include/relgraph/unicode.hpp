#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace relgraph::unicode {

// All offsets exposed by the library count Unicode scalar values, not bytes.

std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view text);

std::size_t length(std::string_view utf8);

/// Byte offsets of every scalar boundary of a UTF-8 string, so scalar-indexed
/// slicing of a long document is O(1) after construction.
class ScalarIndex {
public:
    explicit ScalarIndex(std::string_view utf8);

    std::size_t size() const noexcept { return offsets_.size() - 1; }
    std::size_t byte_offset(std::size_t scalar) const { return offsets_.at(scalar); }
    std::string_view slice(std::size_t start, std::size_t end) const;

private:
    std::string_view text_;
    std::vector<std::size_t> offsets_;
};

/// Unicode NFC.
std::string nfc(std::string_view utf8);

/// NFC, trim, and collapse internal whitespace runs to one ASCII space.
/// Case is preserved.
std::string normalize_name(std::string_view utf8);

/// Scalar-offset start of every non-overlapping occurrence of `needle`.
std::vector<std::size_t> find_all(std::string_view haystack, std::string_view needle);

} // namespace relgraph::unicode
