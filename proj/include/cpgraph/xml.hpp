#pragma once

// Small non-validating XML reader that keeps byte offsets for diagnostics.
// Handles elements, attributes, text, comments, CDATA, the XML declaration and
// the five predefined entities. No DTDs, no namespaces.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cpg {

// Byte offsets [begin, end) into the parsed document.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

namespace xml {

struct Attribute {
  std::string name;
  std::string value;
  SourceSpan span;
};

struct Element {
  std::string name;
  std::vector<Attribute> attributes;
  std::vector<Element> children;
  std::string text;       // concatenated character data of this element
  SourceSpan span;        // whole element, start tag to end tag
  SourceSpan text_span;   // first to last character-data byte
  std::size_t text_offset = 0;  // document offset of text[0] when text is unescaped

  const Attribute* attribute(std::string_view attr_name) const;
  const Element* child(std::string_view child_name) const;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& message, SourceSpan span)
      : std::runtime_error(message), span_(span) {}
  SourceSpan span() const { return span_; }

 private:
  SourceSpan span_;
};

// Parses a whole document and returns its root element.
Element parse(std::string_view document);

// Escapes &, <, >, " for use in attribute values and text.
std::string escape(std::string_view s);

}  // namespace xml
}  // namespace cpg
