#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "secured/memory_image.hpp"

namespace secured {

class AssemblyError : public std::runtime_error {
 public:
  AssemblyError(int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// One source line after parsing: zero or more labels and at most one
/// instruction or directive. Mnemonics keep their source spelling; operands
/// are the raw comma-separated fields.
struct Statement {
  std::vector<std::string> labels;
  std::string mnemonic;  // empty for a label-only line; directives start with '.'
  std::vector<std::string> operands;
  int line = 0;
  int column = 1;

  bool is_directive() const { return !mnemonic.empty() && mnemonic.front() == '.'; }
  bool is_instruction() const { return !mnemonic.empty() && !is_directive(); }
};

/// Parsed assembly source. Instrumentation passes edit it and re-emit text.
struct Program {
  std::vector<Statement> statements;

  std::string to_source() const;
};

Program parse(std::string_view source);

struct BalanceAnnotation {
  std::string start_label;
  std::string end_label;
};

struct Symbol {
  Addr address = 0;
  Space space = Space::Instruction;
};

struct SymbolTable {
  std::map<std::string, Symbol> labels;
  /// jr address -> declared targets (from `.jtargets`).
  std::map<Addr, std::vector<Addr>> jump_targets;
  /// `.balance start, end` annotations, in source order.
  std::vector<BalanceAnnotation> balance;

  std::optional<Addr> address_of(const std::string& label) const;
  /// Labels bound to `a` in `space`, sorted.
  std::vector<std::string> labels_at(Space space, Addr a) const;
};

struct Assembly {
  MemoryImage image;
  SymbolTable symbols;
  /// Address of each statement that emits words (instruction or `.word`).
  std::vector<std::optional<Addr>> statement_address;
};

Assembly assemble(const Program& program);
Assembly assemble(std::string_view source);

/// Renders the code of an image as assembly that reassembles to the same
/// code words. Words that do not decode become `.word 0x...`.
std::string disassemble(const MemoryImage& img);

}  // namespace secured
