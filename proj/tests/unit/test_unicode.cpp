#include "relgraph/unicode.hpp"

#include <doctest.h>

using namespace relgraph;

TEST_CASE("decode and encode round trip") {
    const std::string s = "Zoë \xF0\x9F\x98\x80 Łódź";
    const auto u = unicode::decode(s);
    CHECK(u.size() == unicode::length(s));
    CHECK(unicode::encode(u) == s);
}

TEST_CASE("scalar index slices by scalar offsets") {
    const std::string s = "aé\xF0\x9F\x98\x80z";
    unicode::ScalarIndex idx(s);
    CHECK(idx.size() == 4);
    CHECK(idx.slice(1, 3) == "é\xF0\x9F\x98\x80");
    CHECK(idx.slice(3, 4) == "z");
    CHECK(idx.slice(2, 2).empty());
}

TEST_CASE("nfc composes") {
    CHECK(unicode::nfc("e\xCC\x81") == "\xC3\xA9");
    CHECK(unicode::nfc("plain") == "plain");
}

TEST_CASE("normalize_name trims and collapses") {
    CHECK(unicode::normalize_name("  Mary \t  Palowski\n") == "Mary Palowski");
    CHECK(unicode::normalize_name("Jose\xCC\x81") == "José");
    CHECK(unicode::normalize_name("   ").empty());
}

TEST_CASE("find_all reports scalar offsets without overlap") {
    CHECK(unicode::find_all("é ana ana", "ana") == std::vector<std::size_t>{2, 6});
    CHECK(unicode::find_all("aaaa", "aa") == std::vector<std::size_t>{0, 2});
    CHECK(unicode::find_all("abc", "").empty());
}
