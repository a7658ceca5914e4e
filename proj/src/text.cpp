#include "settlekit/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>
#include <unicode/utf8.h>

#include <stdexcept>

namespace settlekit::text {

namespace {

const icu::Normalizer2& nfc_instance() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  return *n;
}

std::string to_std(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

icu::UnicodeString from_std(std::string_view s) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

icu::UnicodeString nfc_u(const icu::UnicodeString& u) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc_instance().normalize(u, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("NFC normalization failed");
  }
  return out;
}

template <typename F>
void for_each_cp(std::string_view s, F&& f) {
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const auto len = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < len) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    if (c < 0) c = 0xFFFD;
    f(static_cast<char32_t>(c), static_cast<std::size_t>(start), static_cast<std::size_t>(i));
  }
}

}  // namespace

DecodedText decode_utf8_lossy(std::string_view bytes) {
  DecodedText out;
  if (bytes.empty()) return out;
  UErrorCode status = U_ZERO_ERROR;
  int32_t needed = 0;
  int32_t subs = 0;
  u_strFromUTF8WithSub(nullptr, 0, &needed, bytes.data(), static_cast<int32_t>(bytes.size()), 0xFFFD,
                       &subs, &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw std::runtime_error("UTF-8 decode failed");
  }
  status = U_ZERO_ERROR;
  icu::UnicodeString u;
  UChar* buf = u.getBuffer(needed);
  u_strFromUTF8WithSub(buf, needed, &needed, bytes.data(), static_cast<int32_t>(bytes.size()), 0xFFFD,
                       &subs, &status);
  u.releaseBuffer(needed);
  if (U_FAILURE(status)) {
    throw std::runtime_error("UTF-8 decode failed");
  }
  out.text = to_std(u);
  out.replacements = static_cast<std::size_t>(subs);
  return out;
}

std::string nfc(std::string_view s) { return to_std(nfc_u(from_std(s))); }

std::string normalize(std::string_view s) {
  icu::UnicodeString u = nfc_u(from_std(s));
  u.toLower(icu::Locale::getRoot());
  return collapse_whitespace(to_std(nfc_u(u)));
}

bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0; }

bool is_cjk_ideograph(char32_t cp) {
  return (cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0x4E00 && cp <= 0x9FFF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2FA1F) ||
         (cp >= 0x3040 && cp <= 0x30FF);
}

bool is_cjk(char32_t cp) {
  return is_cjk_ideograph(cp) || (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF00 && cp <= 0xFFEF);
}

bool is_alnum(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  return u_isalnum(c) != 0 || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for_each_cp(s, [&](char32_t cp, std::size_t b, std::size_t e) {
    if (is_space(cp)) {
      pending_space = !out.empty();
      return;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (cp == 0xFFFD && s.substr(b, e - b) != "\xEF\xBF\xBD") {
      append_utf8(out, cp);
    } else {
      out.append(s.substr(b, e - b));
    }
  });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t first = std::string_view::npos;
  std::size_t last = 0;
  for_each_cp(s, [&](char32_t cp, std::size_t b, std::size_t e) {
    if (is_space(cp)) return;
    if (first == std::string_view::npos) first = b;
    last = e;
  });
  if (first == std::string_view::npos) return {};
  return std::string(s.substr(first, last - first));
}

std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for_each_cp(s, [&](char32_t, std::size_t, std::size_t) { ++n; });
  return n;
}

std::string truncate_codepoints(std::string_view s, std::size_t n) {
  std::size_t seen = 0;
  std::size_t cut = s.size();
  for_each_cp(s, [&](char32_t, std::size_t b, std::size_t) {
    if (seen == n && cut == s.size()) cut = b;
    ++seen;
  });
  return std::string(s.substr(0, cut));
}

std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for_each_cp(s, [&](char32_t cp, std::size_t, std::size_t) { out.push_back(cp); });
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  uint8_t buf[4];
  int32_t i = 0;
  UBool err = false;
  U8_APPEND(buf, i, 4, static_cast<UChar32>(cp), err);
  if (err) {
    out.append("\xEF\xBF\xBD");
    return;
  }
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(i));
}

std::string to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

std::vector<std::string> tokenize_terms(std::string_view normalized) {
  std::vector<std::string> terms;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) terms.push_back(std::move(run));
    run.clear();
  };
  for_each_cp(normalized, [&](char32_t cp, std::size_t b, std::size_t e) {
    if (is_cjk_ideograph(cp)) {
      flush();
      terms.emplace_back(normalized.substr(b, e - b));
    } else if (is_alnum(cp)) {
      run.append(normalized.substr(b, e - b));
    } else {
      flush();
    }
  });
  flush();
  return terms;
}

std::string join_sentences(const std::vector<std::string>& sentences) {
  std::string out;
  char32_t last = 0;
  for (const auto& s : sentences) {
    if (s.empty()) continue;
    const std::u32string u = to_u32(s);
    if (!out.empty() && !is_cjk(last) && !is_cjk(u.front())) out.push_back(' ');
    out += s;
    last = u.back();
  }
  return out;
}

std::string strip_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for_each_cp(s, [&](char32_t cp, std::size_t b, std::size_t e) {
    if (!is_space(cp)) out.append(s.substr(b, e - b));
  });
  return out;
}

}  // namespace settlekit::text
