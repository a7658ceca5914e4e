#include <doctest.h>

#include <random>

#include "settlekit/digest.hpp"
#include "settlekit/text.hpp"

using namespace settlekit;

TEST_CASE("normalize composes, lowercases and collapses whitespace") {
  CHECK(text::normalize("Cafe\xCC\x81  Plaza") == "caf\xC3\xA9 plaza");
  CHECK(text::normalize("\xE3\x80\x80 海绵城市\t\n ") == "海绵城市");
  CHECK(text::normalize("ＡＢＣ") == "ａｂｃ");
  CHECK(text::normalize("") == "");
}

TEST_CASE("normalize is idempotent on random mixed input") {
  const std::vector<std::string> atoms{"A", "b", " ", "\t", "\xE3\x80\x80", "海", "城", "e\xCC\x81", "\xC3\x89",
                                       "Σ", "ß", "1", "。", "!", "\xEF\xBC\xA1", "\xC2\xA0"};
  std::mt19937 rng(11);
  for (int round = 0; round < 500; ++round) {
    std::string s;
    const int len = static_cast<int>(rng() % 20);
    for (int i = 0; i < len; ++i) s += atoms[rng() % atoms.size()];
    const std::string once = text::normalize(s);
    CHECK(text::normalize(once) == once);
    CHECK(once == text::trim(once));
    CHECK(once.find("  ") == std::string::npos);
  }
}

TEST_CASE("lossy decoding counts replacements") {
  const auto ok = text::decode_utf8_lossy("plain 文字");
  CHECK(ok.text == "plain 文字");
  CHECK(ok.replacements == 0);
  const auto bad = text::decode_utf8_lossy(std::string("a\xFF" "b\xC3", 4));
  CHECK(bad.replacements == 2);
  CHECK(bad.text == "a\xEF\xBF\xBD" "b\xEF\xBF\xBD");
}

TEST_CASE("code point counting and truncation") {
  CHECK(text::codepoint_count("海绵city") == 6);
  CHECK(text::truncate_codepoints("海绵city", 3) == "海绵c");
  CHECK(text::truncate_codepoints("ab", 10) == "ab");
  CHECK(text::to_utf8(text::to_u32("𠀀x")) == "𠀀x");
}

TEST_CASE("terms: one per ideograph, alphanumeric runs otherwise") {
  CHECK(text::tokenize_terms("海绵city 2023, rain-garden") ==
        std::vector<std::string>{"海", "绵", "city", "2023", "rain", "garden"});
  CHECK(text::tokenize_terms("かな漢字") == std::vector<std::string>{"か", "な", "漢", "字"});
  CHECK(text::tokenize_terms("。，!!").empty());
}

TEST_CASE("sentence joining omits spaces at CJK boundaries") {
  CHECK(text::join_sentences({"第一句。", "第二句。"}) == "第一句。第二句。");
  CHECK(text::join_sentences({"One.", "Two."}) == "One. Two.");
  CHECK(text::join_sentences({"One.", "第二句。"}) == "One.第二句。");
  CHECK(text::join_sentences({}).empty());
}

TEST_CASE("character classes") {
  CHECK(text::is_cjk_ideograph(U'海'));
  CHECK(text::is_cjk_ideograph(0x20000));
  CHECK_FALSE(text::is_cjk_ideograph(U'。'));
  CHECK(text::is_cjk(U'。'));
  CHECK(text::is_cjk(U'，'));
  CHECK(text::is_space(0x3000));
  CHECK(text::is_space(0x00A0));
  CHECK(text::strip_whitespace(" a \xE3\x80\x80 b\n") == "ab");
}

TEST_CASE("sha256 matches published vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update("a").update("bc");
  CHECK(h.hex_digest() == sha256_hex("abc"));
}
