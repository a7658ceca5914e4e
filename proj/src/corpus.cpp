#include "settlekit/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "settlekit/digest.hpp"

namespace settlekit::corpus {

namespace {

constexpr std::array<std::string_view, 3> kKindNames{"standard", "book", "website"};
constexpr std::array<std::string_view, 5> kStatusNames{"ingested", "extracted", "filtered", "deduped",
                                                       "rejected"};

// Elements whose whole content is discarded.
constexpr std::array<std::string_view, 5> kDroppedElements{"table", "script", "style", "head", "noscript"};

// Tags that break text flow; replaced by a space so words do not fuse.
constexpr std::array<std::string_view, 30> kBlockTags{
    "p",     "div",    "br",      "li",     "ul",   "ol",      "h1",     "h2",       "h3",  "h4",
    "h5",    "h6",     "tr",      "td",     "th",   "section", "article", "header",  "footer", "nav",
    "title", "hr",     "dd",      "dt",     "dl",   "main",    "aside",   "blockquote", "figure",
    "figcaption"};

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != prefix[i]) return false;
  }
  return true;
}

bool is_tag_start(std::string_view s, std::size_t i) {
  if (i + 1 >= s.size() || s[i] != '<') return false;
  const unsigned char c = static_cast<unsigned char>(s[i + 1]);
  return std::isalpha(c) || c == '/' || c == '!' || c == '?';
}

// Index one past the '>' closing the tag at `i`, honouring quoted attributes.
std::size_t tag_end(std::string_view s, std::size_t i) {
  char quote = 0;
  for (std::size_t j = i + 1; j < s.size(); ++j) {
    const char c = s[j];
    if (quote != 0) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      return j + 1;
    }
  }
  return s.size();
}

struct TagInfo {
  std::string name;
  bool closing = false;
  bool self_closing = false;
};

TagInfo parse_tag(std::string_view tag) {
  TagInfo info;
  std::size_t i = 1;
  if (i < tag.size() && tag[i] == '/') {
    info.closing = true;
    ++i;
  }
  const std::size_t start = i;
  while (i < tag.size() && (std::isalnum(static_cast<unsigned char>(tag[i])) || tag[i] == '-')) ++i;
  info.name = lower_ascii(tag.substr(start, i - start));
  info.self_closing = tag.size() >= 2 && tag[tag.size() - 2] == '/';
  return info;
}

// Position just past the close tag matching an open `name` element that
// starts its content at `from`; nested same-name elements are counted.
std::size_t skip_element(std::string_view s, std::size_t from, const std::string& name) {
  int depth = 1;
  std::size_t i = from;
  while (i < s.size()) {
    const std::size_t lt = s.find('<', i);
    if (lt == std::string_view::npos) return s.size();
    if (!is_tag_start(s, lt)) {
      i = lt + 1;
      continue;
    }
    const std::size_t end = tag_end(s, lt);
    const TagInfo t = parse_tag(s.substr(lt, end - lt));
    if (t.name == name) {
      if (t.closing) {
        if (--depth == 0) return end;
      } else if (!t.self_closing) {
        ++depth;
      }
    }
    i = end;
  }
  return s.size();
}

std::string strip_markup(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 4, "<!--") == 0) {
      const std::size_t end = s.find("-->", i + 4);
      i = end == std::string_view::npos ? s.size() : end + 3;
      out.push_back(' ');
      continue;
    }
    if (!is_tag_start(s, i)) {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t end = tag_end(s, i);
    const TagInfo t = parse_tag(s.substr(i, end - i));
    i = end;
    if (!t.closing && !t.self_closing &&
        std::find(kDroppedElements.begin(), kDroppedElements.end(), t.name) != kDroppedElements.end()) {
      i = skip_element(s, i, t.name);
      out.push_back(' ');
    } else if (std::find(kBlockTags.begin(), kBlockTags.end(), t.name) != kBlockTags.end()) {
      out.push_back(' ');
    }
  }
  return out;
}

struct NamedEntity {
  std::string_view name;
  char32_t cp;
};

constexpr std::array<NamedEntity, 16> kEntities{{{"amp", U'&'},
                                                 {"lt", U'<'},
                                                 {"gt", U'>'},
                                                 {"quot", U'"'},
                                                 {"apos", U'\''},
                                                 {"nbsp", 0x00A0},
                                                 {"mdash", 0x2014},
                                                 {"ndash", 0x2013},
                                                 {"hellip", 0x2026},
                                                 {"copy", 0x00A9},
                                                 {"reg", 0x00AE},
                                                 {"middot", 0x00B7},
                                                 {"ldquo", 0x201C},
                                                 {"rdquo", 0x201D},
                                                 {"lsquo", 0x2018},
                                                 {"rsquo", 0x2019}}};

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back(s[i++]);
      continue;
    }
    const std::string_view body = s.substr(i + 1, semi - i - 1);
    std::optional<char32_t> cp;
    if (body.size() >= 2 && body[0] == '#') {
      const bool hex = body[1] == 'x' || body[1] == 'X';
      const std::string_view digits = body.substr(hex ? 2 : 1);
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [hex](char c) {
            return hex ? std::isxdigit(static_cast<unsigned char>(c)) != 0
                       : std::isdigit(static_cast<unsigned char>(c)) != 0;
          })) {
        const unsigned long v = std::stoul(std::string(digits), nullptr, hex ? 16 : 10);
        if (v > 0 && v <= 0x10FFFF && !(v >= 0xD800 && v <= 0xDFFF)) cp = static_cast<char32_t>(v);
      }
    } else {
      for (const auto& e : kEntities) {
        if (e.name == body) cp = e.cp;
      }
    }
    if (!cp) {
      out.push_back(s[i++]);
      continue;
    }
    text::append_utf8(out, *cp);
    i = semi + 1;
  }
  return out;
}

bool is_url_token(std::string_view tok) {
  if (starts_with_ci(tok, 0, "www.")) return true;
  const std::size_t sep = tok.find("://");
  if (sep == std::string_view::npos || sep == 0) return false;
  if (!std::isalpha(static_cast<unsigned char>(tok[0]))) return false;
  return std::all_of(tok.begin(), tok.begin() + static_cast<std::ptrdiff_t>(sep), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '.' || c == '-';
  });
}

std::string drop_url_tokens(std::string_view collapsed) {
  std::string out;
  out.reserve(collapsed.size());
  std::size_t i = 0;
  while (i <= collapsed.size()) {
    std::size_t sp = collapsed.find(' ', i);
    if (sp == std::string_view::npos) sp = collapsed.size();
    const std::string_view tok = collapsed.substr(i, sp - i);
    if (!tok.empty() && !is_url_token(tok)) {
      if (!out.empty()) out.push_back(' ');
      out.append(tok);
    }
    i = sp + 1;
  }
  return out;
}

bool is_cjk_terminator(char32_t cp) {
  return cp == U'。' || cp == U'！' || cp == U'？' || cp == U'；';
}

bool is_western_terminator(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?'; }

bool is_closer(char32_t cp) {
  return cp == U'"' || cp == U'\'' || cp == U')' || cp == U'”' || cp == U'’' || cp == U'）' ||
         cp == U'」' || cp == U'』' || cp == U'】' || cp == U'》';
}

}  // namespace

std::string_view to_string(SourceKind k) { return kKindNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(DocStatus s) { return kStatusNames[static_cast<std::size_t>(s)]; }

SourceKind parse_source_kind(std::string_view s) {
  const std::string l = lower_ascii(s);
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == l) return static_cast<SourceKind>(i);
  }
  throw CorpusError("unknown source kind: " + std::string(s));
}

DocStatus parse_doc_status(std::string_view s) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == s) return static_cast<DocStatus>(i);
  }
  throw CorpusError("unknown document status: " + std::string(s));
}

std::string document_id(SourceKind kind, std::string_view content) {
  Sha256 h;
  h.update(to_string(kind)).update(std::string_view("\n", 1)).update(content);
  return h.hex_digest();
}

void check_invariants(const Document& doc) {
  const bool extracted = doc.status == DocStatus::Extracted || doc.status == DocStatus::Filtered ||
                         doc.status == DocStatus::Deduped;
  if (extracted && !doc.clean_text) {
    throw CorpusError("document " + doc.id + ": status " + std::string(to_string(doc.status)) +
                      " requires clean_text");
  }
  if (doc.status == DocStatus::Ingested && doc.clean_text) {
    throw CorpusError("document " + doc.id + ": ingested document carries clean_text");
  }
  if (doc.rejected() == doc.reject_reason.empty()) {
    throw CorpusError("document " + doc.id + ": reject_reason must be set iff rejected");
  }
}

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
  for (const auto& d : docs_) last_order_ = std::max(last_order_, d.ingest_order);
}

const Document& Corpus::ingest(const std::filesystem::path& path, SourceKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("unreadable file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw CorpusError("read failed: " + path.string());
  return ingest_bytes(buf.str(), kind, path.generic_string());
}

const Document& Corpus::ingest_bytes(std::string_view bytes, SourceKind kind, std::string source_path) {
  text::DecodedText decoded = text::decode_utf8_lossy(bytes);
  Document doc;
  doc.source_kind = kind;
  doc.source_path = std::move(source_path);
  doc.id = document_id(kind, decoded.text);
  doc.title = html_title(decoded.text);
  doc.replacement_count = decoded.replacements;
  doc.raw_text = std::move(decoded.text);
  doc.ingest_order = ++last_order_;
  if (text::strip_whitespace(doc.raw_text).empty()) {
    doc.status = DocStatus::Rejected;
    doc.reject_reason = "empty";
  }
  docs_.push_back(std::move(doc));
  return docs_.back();
}

std::string extract_plain(std::string_view raw) {
  const std::string stripped = strip_markup(raw);
  const std::string decoded = decode_entities(stripped);
  return drop_url_tokens(text::collapse_whitespace(decoded));
}

std::optional<std::string> html_title(std::string_view raw) {
  const std::string lower = lower_ascii(raw);
  const std::size_t open = lower.find("<title");
  if (open == std::string::npos) return std::nullopt;
  const std::size_t start = tag_end(raw, open);
  const std::size_t close = lower.find("</title", start);
  if (close == std::string::npos) return std::nullopt;
  std::string t = text::collapse_whitespace(decode_entities(raw.substr(start, close - start)));
  if (t.empty()) return std::nullopt;
  return t;
}

Document extract_text(const Document& doc) {
  if (doc.status != DocStatus::Ingested) {
    throw CorpusError("extract_text: document " + doc.id + " has status " +
                      std::string(to_string(doc.status)) + ", expected ingested");
  }
  Document out = doc;
  out.clean_text = extract_plain(doc.raw_text);
  if (out.clean_text->empty()) {
    out.status = DocStatus::Rejected;
    out.reject_reason = "no text content";
    return out;
  }
  out.status = DocStatus::Extracted;
  out.id = document_id(doc.source_kind, text::normalize(*out.clean_text));
  return out;
}

std::vector<std::string> split_text(std::string_view clean) {
  const std::u32string u = text::to_u32(clean);
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::string s = text::trim(text::to_utf8(std::u32string_view(u).substr(start, end - start)));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };
  std::size_t i = 0;
  while (i < u.size()) {
    const char32_t c = u[i];
    if (!is_cjk_terminator(c) && !is_western_terminator(c)) {
      ++i;
      continue;
    }
    bool cjk = false;
    std::size_t j = i;
    while (j < u.size() && (is_cjk_terminator(u[j]) || is_western_terminator(u[j]))) {
      cjk = cjk || is_cjk_terminator(u[j]);
      ++j;
    }
    while (j < u.size() && is_closer(u[j])) ++j;
    const bool boundary =
        cjk || j == u.size() || text::is_space(u[j]) || text::is_cjk(u[j]);
    if (boundary) emit(j);
    i = j;
  }
  emit(u.size());
  return out;
}

std::vector<Sentence> split_sentences(const Document& doc) {
  const bool ready = doc.clean_text && (doc.status == DocStatus::Extracted ||
                                        doc.status == DocStatus::Filtered || doc.status == DocStatus::Deduped);
  if (!ready) {
    throw CorpusError("split_sentences: document " + doc.id + " is not extracted");
  }
  std::vector<Sentence> out;
  for (auto& s : split_text(*doc.clean_text)) {
    Sentence sent;
    sent.doc_id = doc.id;
    sent.index = out.size();
    sent.normalized = text::normalize(s);
    sent.text = std::move(s);
    out.push_back(std::move(sent));
  }
  return out;
}

nlohmann::ordered_json to_json(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["source_kind"] = to_string(doc.source_kind);
  j["source_path"] = doc.source_path;
  j["title"] = doc.title ? nlohmann::ordered_json(*doc.title) : nlohmann::ordered_json(nullptr);
  j["status"] = to_string(doc.status);
  j["reject_reason"] =
      doc.rejected() ? nlohmann::ordered_json(doc.reject_reason) : nlohmann::ordered_json(nullptr);
  j["raw_text"] = doc.raw_text;
  j["clean_text"] = doc.clean_text ? nlohmann::ordered_json(*doc.clean_text) : nlohmann::ordered_json(nullptr);
  j["ingest_order"] = doc.ingest_order;
  return j;
}

Document document_from_json(const nlohmann::json& j) {
  static constexpr std::array<std::string_view, 9> kFields{
      "id", "source_kind", "source_path", "title", "status", "reject_reason", "raw_text", "clean_text",
      "ingest_order"};
  if (!j.is_object() || j.size() != kFields.size()) {
    throw CorpusError("corpus store record must be an object with exactly 9 fields");
  }
  for (auto f : kFields) {
    if (!j.contains(std::string(f))) throw CorpusError("corpus store record missing field " + std::string(f));
  }
  Document d;
  d.id = j.at("id").get<std::string>();
  d.source_kind = parse_source_kind(j.at("source_kind").get<std::string>());
  d.source_path = j.at("source_path").get<std::string>();
  if (!j.at("title").is_null()) d.title = j.at("title").get<std::string>();
  d.status = parse_doc_status(j.at("status").get<std::string>());
  if (!j.at("reject_reason").is_null()) d.reject_reason = j.at("reject_reason").get<std::string>();
  d.raw_text = j.at("raw_text").get<std::string>();
  if (!j.at("clean_text").is_null()) d.clean_text = j.at("clean_text").get<std::string>();
  d.ingest_order = j.at("ingest_order").get<std::uint64_t>();
  check_invariants(d);
  return d;
}

void write_store(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus store " + path.string());
  for (const auto& d : docs) out << to_json(d).dump() << '\n';
  if (!out) throw CorpusError("write failed: " + path.string());
}

std::vector<Document> read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus store " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      docs.push_back(document_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace settlekit::corpus
