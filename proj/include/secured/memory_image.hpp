#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "secured/isa.hpp"

namespace secured {

/// Program sections. Text lives in instruction memory, everything else in
/// data memory (the two address spaces are separate).
enum class Section : std::uint8_t { Text, Data, BalData, BalTable, Stack };

enum class Space : std::uint8_t { Instruction, Data };

std::string_view section_name(Section s);
std::optional<Section> section_from_name(std::string_view name);
constexpr Space space_of(Section s) { return s == Section::Text ? Space::Instruction : Space::Data; }

struct Segment {
  Section section = Section::Text;
  Addr start = 0;
  std::vector<Word> words;

  Addr end() const { return start + static_cast<Addr>(words.size() * 4); }
  bool contains(Addr a) const { return a >= start && a < end(); }
  friend bool operator==(const Segment&, const Segment&) = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loadable program: ordered, per-space disjoint segments.
class MemoryImage {
 public:
  MemoryImage() = default;

  /// Appends a segment; throws ImageError on misalignment or overlap with a
  /// segment in the same address space.
  void add_segment(Segment seg);

  const std::vector<Segment>& segments() const { return segments_; }
  std::vector<Segment>& segments() { return segments_; }

  const Segment* find(Space space, Addr a) const;
  Segment* find(Space space, Addr a);

  std::optional<Word> read(Space space, Addr a) const;
  /// Overwrites an existing word; throws if `a` is not mapped.
  void write(Space space, Addr a, Word w);

  /// Start of the first text segment; the program entry point.
  Addr entry() const { return entry_; }
  void set_entry(Addr a) { entry_ = a; }

  /// Code words as (address, word), in address order.
  std::vector<std::pair<Addr, Word>> code_words() const;

  /// Union of two images with disjointness checks (used to load an
  /// application and a complementary program into the same core).
  static MemoryImage merge(const MemoryImage& a, const MemoryImage& b);

  friend bool operator==(const MemoryImage&, const MemoryImage&) = default;

 private:
  std::vector<Segment> segments_;
  Addr entry_ = 0;
};

/// Text image format: `@section name start end` headers followed by
/// `ADDR: WORD` lines, all hex, lowercase, 8 digits. `#` starts a comment;
/// the writer emits `# entry 0x...` first.
std::string write_image(const MemoryImage& img);
MemoryImage read_image(std::string_view text);

MemoryImage load_image_file(const std::string& path);
void save_image_file(const std::string& path, const MemoryImage& img);

}  // namespace secured
