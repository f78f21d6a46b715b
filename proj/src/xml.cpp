#include "cpgraph/xml.hpp"

#include <cctype>

namespace cpg::xml {

namespace {

bool is_name_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}

bool is_name_char(char c) {
  return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
}

class Reader {
 public:
  explicit Reader(std::string_view doc) : doc_(doc) {}

  Element document() {
    skip_prolog();
    if (at_end() || peek() != '<') fail("expected root element", pos_, pos_ + 1);
    Element root = element();
    skip_misc();
    if (!at_end()) fail("content after the root element", pos_, doc_.size());
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message, std::size_t begin, std::size_t end) const {
    end = std::min(std::max(end, begin), doc_.size());
    begin = std::min(begin, doc_.size());
    throw SyntaxError(message + " at byte " + std::to_string(begin), SourceSpan{begin, end});
  }

  bool at_end() const { return pos_ >= doc_.size(); }
  char peek() const { return doc_[pos_]; }
  bool starts_with(std::string_view s) const { return doc_.substr(pos_, s.size()) == s; }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }

  void skip_until(std::string_view terminator, const char* what) {
    const std::size_t start = pos_;
    const auto found = doc_.find(terminator, pos_);
    if (found == std::string_view::npos) fail(std::string("unterminated ") + what, start, doc_.size());
    pos_ = found + terminator.size();
  }

  // Comments, processing instructions and whitespace between markup.
  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else {
        return;
      }
    }
  }

  void skip_prolog() {
    if (starts_with("\xEF\xBB\xBF")) pos_ += 3;
    skip_misc();
    if (starts_with("<!DOCTYPE")) {
      skip_until(">", "doctype");
      skip_misc();
    }
  }

  std::string name() {
    const std::size_t start = pos_;
    if (at_end() || !is_name_start(peek())) fail("expected a name", start, start + 1);
    while (!at_end() && is_name_char(peek())) ++pos_;
    return std::string(doc_.substr(start, pos_ - start));
  }

  void decode_into(std::string& out, std::string_view raw, std::size_t raw_offset) const {
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (raw[k] != '&') {
        out += raw[k];
        continue;
      }
      const auto semi = raw.find(';', k);
      if (semi == std::string_view::npos)
        fail("unterminated entity reference", raw_offset + k, raw_offset + raw.size());
      const auto entity = raw.substr(k + 1, semi - k - 1);
      if (entity == "lt") out += '<';
      else if (entity == "gt") out += '>';
      else if (entity == "amp") out += '&';
      else if (entity == "quot") out += '"';
      else if (entity == "apos") out += '\'';
      else if (!entity.empty() && entity[0] == '#') {
        unsigned long code = 0;
        try {
          code = entity.size() > 1 && (entity[1] == 'x' || entity[1] == 'X')
                     ? std::stoul(std::string(entity.substr(2)), nullptr, 16)
                     : std::stoul(std::string(entity.substr(1)));
        } catch (const std::exception&) {
          fail("bad character reference", raw_offset + k, raw_offset + semi + 1);
        }
        if (code > 0x7F) fail("non-ASCII character reference unsupported", raw_offset + k, raw_offset + semi + 1);
        out += static_cast<char>(code);
      } else {
        fail("unknown entity '&" + std::string(entity) + ";'", raw_offset + k, raw_offset + semi + 1);
      }
      k = semi;
    }
  }

  Attribute attribute() {
    Attribute attr;
    const std::size_t start = pos_;
    attr.name = name();
    skip_space();
    if (at_end() || peek() != '=') fail("expected '=' after attribute name", pos_, pos_ + 1);
    ++pos_;
    skip_space();
    if (at_end() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value", pos_, pos_ + 1);
    const char quote = peek();
    ++pos_;
    const auto close = doc_.find(quote, pos_);
    if (close == std::string_view::npos) fail("unterminated attribute value", start, doc_.size());
    const auto raw = doc_.substr(pos_, close - pos_);
    if (raw.find('<') != std::string_view::npos) fail("'<' in attribute value", pos_, close);
    decode_into(attr.value, raw, pos_);
    pos_ = close + 1;
    attr.span = {start, pos_};
    return attr;
  }

  void append_text(Element& e, std::string_view raw, std::size_t offset) {
    if (raw.empty()) return;
    if (e.text.empty() && e.text_span.end == 0) {
      e.text_span.begin = offset;
      e.text_offset = offset;
    }
    e.text_span.end = offset + raw.size();
    decode_into(e.text, raw, offset);
  }

  Element element() {
    Element e;
    const std::size_t start = pos_;
    ++pos_;  // '<'
    e.name = name();
    for (;;) {
      const bool had_space = !at_end() && std::isspace(static_cast<unsigned char>(peek()));
      skip_space();
      if (at_end()) fail("unterminated start tag <" + e.name + ">", start, doc_.size());
      if (starts_with("/>")) {
        pos_ += 2;
        e.span = {start, pos_};
        return e;
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      if (!had_space) fail("expected whitespace before attribute", pos_, pos_ + 1);
      Attribute attr = attribute();
      for (const auto& existing : e.attributes)
        if (existing.name == attr.name) fail("duplicate attribute '" + attr.name + "'", attr.span.begin, attr.span.end);
      e.attributes.push_back(std::move(attr));
    }

    for (;;) {
      if (at_end()) fail("missing end tag </" + e.name + ">", start, doc_.size());
      if (starts_with("</")) {
        const std::size_t close_start = pos_;
        pos_ += 2;
        const std::string closing = name();
        skip_space();
        if (at_end() || peek() != '>') fail("malformed end tag", close_start, pos_);
        ++pos_;
        if (closing != e.name)
          fail("end tag </" + closing + "> does not match <" + e.name + ">", close_start, pos_);
        e.span = {start, pos_};
        return e;
      }
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<![CDATA[")) {
        const std::size_t body = pos_ + 9;
        skip_until("]]>", "CDATA section");
        const auto raw = doc_.substr(body, pos_ - 3 - body);
        if (e.text.empty() && e.text_span.end == 0) e.text_span.begin = e.text_offset = body;
        e.text.append(raw);
        e.text_span.end = body + raw.size();
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else if (peek() == '<') {
        e.children.push_back(element());
      } else {
        const std::size_t text_start = pos_;
        while (!at_end() && peek() != '<') ++pos_;
        append_text(e, doc_.substr(text_start, pos_ - text_start), text_start);
      }
    }
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
};

}  // namespace

const Attribute* Element::attribute(std::string_view attr_name) const {
  for (const auto& a : attributes)
    if (a.name == attr_name) return &a;
  return nullptr;
}

const Element* Element::child(std::string_view child_name) const {
  for (const auto& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

Element parse(std::string_view document) { return Reader(document).document(); }

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace cpg::xml
