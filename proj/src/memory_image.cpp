#include "secured/memory_image.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace secured {

namespace {

constexpr std::array<std::string_view, 5> kSectionNames = {"text", "data", "baldata", "baltable",
                                                           "stack"};

std::string hex8(Word w) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", w);
  return buf;
}

Word parse_hex(std::string_view s, int line) {
  if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
  if (s.empty() || s.size() > 8)
    throw ImageError("image line " + std::to_string(line) + ": bad hex value");
  Word v = 0;
  for (char c : s) {
    unsigned d;
    if (c >= '0' && c <= '9')
      d = c - '0';
    else if (c >= 'a' && c <= 'f')
      d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      d = c - 'A' + 10;
    else
      throw ImageError("image line " + std::to_string(line) + ": bad hex digit");
    v = (v << 4) | d;
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view section_name(Section s) { return kSectionNames[static_cast<std::size_t>(s)]; }

std::optional<Section> section_from_name(std::string_view name) {
  for (std::size_t k = 0; k < kSectionNames.size(); ++k)
    if (kSectionNames[k] == name) return static_cast<Section>(k);
  return std::nullopt;
}

void MemoryImage::add_segment(Segment seg) {
  if (seg.start % 4 != 0) throw ImageError("segment start not word-aligned");
  if (seg.words.empty()) return;
  const Space sp = space_of(seg.section);
  for (const auto& other : segments_) {
    if (space_of(other.section) != sp) continue;
    if (seg.start < other.end() && other.start < seg.end()) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "segment [0x%x,0x%x) overlaps [0x%x,0x%x)", seg.start,
                    seg.end(), other.start, other.end());
      throw ImageError(buf);
    }
  }
  if (sp == Space::Instruction &&
      std::none_of(segments_.begin(), segments_.end(),
                   [](const Segment& s) { return s.section == Section::Text; }))
    entry_ = seg.start;
  segments_.push_back(std::move(seg));
}

const Segment* MemoryImage::find(Space space, Addr a) const {
  for (const auto& s : segments_)
    if (space_of(s.section) == space && s.contains(a)) return &s;
  return nullptr;
}

Segment* MemoryImage::find(Space space, Addr a) {
  for (auto& s : segments_)
    if (space_of(s.section) == space && s.contains(a)) return &s;
  return nullptr;
}

std::optional<Word> MemoryImage::read(Space space, Addr a) const {
  const Segment* s = find(space, a);
  if (!s || a % 4 != 0) return std::nullopt;
  return s->words[(a - s->start) / 4];
}

void MemoryImage::write(Space space, Addr a, Word w) {
  Segment* s = find(space, a);
  if (!s || a % 4 != 0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "write to unmapped address 0x%x", a);
    throw ImageError(buf);
  }
  s->words[(a - s->start) / 4] = w;
}

std::vector<std::pair<Addr, Word>> MemoryImage::code_words() const {
  std::vector<std::pair<Addr, Word>> out;
  for (const auto& s : segments_) {
    if (s.section != Section::Text) continue;
    for (std::size_t k = 0; k < s.words.size(); ++k)
      out.emplace_back(s.start + static_cast<Addr>(4 * k), s.words[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

MemoryImage MemoryImage::merge(const MemoryImage& a, const MemoryImage& b) {
  MemoryImage out = a;
  for (const auto& s : b.segments_) out.add_segment(s);
  out.entry_ = a.entry_;
  return out;
}

std::string write_image(const MemoryImage& img) {
  std::ostringstream os;
  os << "# entry 0x" << hex8(img.entry()) << "\n";
  for (const auto& s : img.segments()) {
    os << "@section " << section_name(s.section) << " 0x" << hex8(s.start) << " 0x" << hex8(s.end())
       << "\n";
    for (std::size_t k = 0; k < s.words.size(); ++k)
      os << hex8(s.start + static_cast<Addr>(4 * k)) << ": " << hex8(s.words[k]) << "\n";
  }
  return os.str();
}

MemoryImage read_image(std::string_view text) {
  MemoryImage img;
  std::optional<Addr> entry;
  std::optional<Segment> current;
  Addr current_end = 0;
  int line_no = 0;

  auto flush = [&] {
    if (!current) return;
    if (current->end() != current_end)
      throw ImageError("section " + std::string(section_name(current->section)) +
                       " has missing words");
    img.add_segment(std::move(*current));
    current.reset();
  };

  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto rest = trim(line.substr(1));
      if (rest.starts_with("entry ")) entry = parse_hex(trim(rest.substr(6)), line_no);
      continue;
    }
    if (line.front() == '@') {
      flush();
      std::istringstream is{std::string(line)};
      std::string tag, name, start, end;
      is >> tag >> name >> start >> end;
      if (tag != "@section") throw ImageError("image line " + std::to_string(line_no) + ": unknown header");
      auto sec = section_from_name(name);
      if (!sec) throw ImageError("image line " + std::to_string(line_no) + ": unknown section " + name);
      current = Segment{*sec, parse_hex(start, line_no), {}};
      current_end = parse_hex(end, line_no);
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || !current)
      throw ImageError("image line " + std::to_string(line_no) + ": expected ADDR: WORD");
    const Addr a = parse_hex(trim(line.substr(0, colon)), line_no);
    const Word w = parse_hex(trim(line.substr(colon + 1)), line_no);
    if (a != current->end())
      throw ImageError("image line " + std::to_string(line_no) + ": non-contiguous address");
    current->words.push_back(w);
  }
  flush();
  if (entry) img.set_entry(*entry);
  return img;
}

MemoryImage load_image_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ImageError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return read_image(ss.str());
}

void save_image_file(const std::string& path, const MemoryImage& img) {
  std::ofstream out(path);
  if (!out) throw ImageError("cannot write " + path);
  out << write_image(img);
}

}  // namespace secured
