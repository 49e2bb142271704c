#include "relgraph/unicode.hpp"

#include "relgraph/error.hpp"

#include <unicode/errorcode.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

namespace relgraph::unicode {

namespace {

std::size_t sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 0;
}

[[noreturn]] void invalid(std::size_t at) {
    throw ParseError("invalid_utf8", 0, "invalid UTF-8 at byte " + std::to_string(at));
}

bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
           c == 0x00A0 || c == 0x3000 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
           c == 0x2029 || c == 0x202F || c == 0x205F;
}

} // namespace

std::u32string decode(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    std::size_t i = 0;
    while (i < utf8.size()) {
        const auto lead = static_cast<unsigned char>(utf8[i]);
        const std::size_t len = sequence_length(lead);
        if (len == 0 || i + len > utf8.size()) invalid(i);
        char32_t cp = len == 1 ? lead : (lead & (0x7F >> len));
        for (std::size_t k = 1; k < len; ++k) {
            const auto cont = static_cast<unsigned char>(utf8[i + k]);
            if ((cont & 0xC0) != 0x80) invalid(i + k);
            cp = (cp << 6) | (cont & 0x3F);
        }
        const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                              (len == 4 && cp < 0x10000);
        if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) invalid(i);
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t c : text) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::size_t length(std::string_view utf8) {
    std::size_t n = 0;
    for (char c : utf8) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    }
    return n;
}

ScalarIndex::ScalarIndex(std::string_view utf8) : text_(utf8) {
    offsets_.reserve(utf8.size() + 1);
    std::size_t i = 0;
    while (i < utf8.size()) {
        offsets_.push_back(i);
        const std::size_t len = sequence_length(static_cast<unsigned char>(utf8[i]));
        if (len == 0 || i + len > utf8.size()) invalid(i);
        i += len;
    }
    offsets_.push_back(utf8.size());
}

std::string_view ScalarIndex::slice(std::size_t start, std::size_t end) const {
    if (start > end || end > size()) throw std::out_of_range("scalar slice out of range");
    return text_.substr(offsets_[start], offsets_[end] - offsets_[start]);
}

std::string nfc(std::string_view utf8) {
    icu::ErrorCode status;
    const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
    if (status.isFailure()) throw Error("icu", status.errorName());
    const auto src = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    const icu::UnicodeString normalized = normalizer->normalize(src, status);
    if (status.isFailure()) throw Error("icu", status.errorName());
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string normalize_name(std::string_view utf8) {
    const std::u32string text = decode(nfc(utf8));
    std::u32string out;
    bool pending_space = false;
    for (char32_t c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(U' ');
        pending_space = false;
        out.push_back(c);
    }
    return encode(out);
}

std::vector<std::size_t> find_all(std::string_view haystack, std::string_view needle) {
    std::vector<std::size_t> hits;
    if (needle.empty()) return hits;
    std::size_t scalar = 0;
    std::size_t scanned = 0;
    std::size_t pos = haystack.find(needle);
    while (pos != std::string_view::npos) {
        scalar += length(haystack.substr(scanned, pos - scanned));
        hits.push_back(scalar);
        scalar += length(needle);
        scanned = pos + needle.size();
        pos = haystack.find(needle, scanned);
    }
    return hits;
}

} // namespace relgraph::unicode
