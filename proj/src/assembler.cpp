#include "secured/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace secured {

AssemblyError::AssemblyError(int line, int column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::optional<Addr> SymbolTable::address_of(const std::string& label) const {
  auto it = labels.find(label);
  if (it == labels.end()) return std::nullopt;
  return it->second.address;
}

std::vector<std::string> SymbolTable::labels_at(Space space, Addr a) const {
  std::vector<std::string> out;
  for (const auto& [name, sym] : labels)
    if (sym.space == space && sym.address == a) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Program parse(std::string_view source) {
  Program prog;
  int line_no = 0;
  while (!source.empty() || line_no == 0) {
    const auto nl = source.find('\n');
    std::string_view raw = source.substr(0, nl);
    source = nl == std::string_view::npos ? std::string_view{} : source.substr(nl + 1);
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);

    Statement st;
    st.line = line_no;
    std::size_t pos = 0;
    auto skip_ws = [&] {
      while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    };
    // Labels.
    for (;;) {
      skip_ws();
      std::size_t end = pos;
      if (end < raw.size() && ident_start(raw[end])) {
        while (end < raw.size() && ident_char(raw[end])) ++end;
        if (end < raw.size() && raw[end] == ':') {
          st.labels.emplace_back(raw.substr(pos, end - pos));
          pos = end + 1;
          continue;
        }
      }
      break;
    }
    skip_ws();
    if (pos < raw.size()) {
      st.column = static_cast<int>(pos) + 1;
      std::size_t end = pos;
      while (end < raw.size() && !std::isspace(static_cast<unsigned char>(raw[end]))) ++end;
      st.mnemonic = std::string(raw.substr(pos, end - pos));
      if (!ident_start(st.mnemonic.front()))
        throw AssemblyError(line_no, st.column, "unexpected '" + st.mnemonic + "'");
      std::string_view rest = trim(raw.substr(end));
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        auto field = trim(rest.substr(0, comma));
        if (field.empty()) throw AssemblyError(line_no, st.column, "empty operand");
        st.operands.emplace_back(field);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
        if (trim(rest).empty()) throw AssemblyError(line_no, st.column, "trailing comma");
      }
    }
    if (!st.labels.empty() || !st.mnemonic.empty()) prog.statements.push_back(std::move(st));
    if (source.empty()) break;
  }
  return prog;
}

std::string Program::to_source() const {
  std::ostringstream os;
  for (const auto& st : statements) {
    for (const auto& l : st.labels) os << l << ":\n";
    if (st.mnemonic.empty()) continue;
    os << (st.is_directive() ? "" : "\t") << st.mnemonic;
    for (std::size_t k = 0; k < st.operands.size(); ++k) os << (k ? ", " : " ") << st.operands[k];
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct Location {
  Section section = Section::Text;
  Addr text = 0;
  Addr data = 0;

  Addr& counter() { return space_of(section) == Space::Instruction ? text : data; }
};

class Assembler {
 public:
  explicit Assembler(const Program& p) : prog_(p) {}

  Assembly run() {
    layout();
    emit();
    Assembly out;
    for (auto& seg : segments_) out.image.add_segment(std::move(seg));
    if (auto e = symbols_.address_of("main"); e && symbols_.labels.at("main").space == Space::Instruction)
      out.image.set_entry(*e);
    out.symbols = std::move(symbols_);
    out.statement_address = std::move(addresses_);
    return out;
  }

 private:
  [[noreturn]] void fail(const Statement& st, const std::string& msg) const {
    throw AssemblyError(st.line, st.column, msg);
  }

  static std::optional<std::int64_t> parse_number(std::string_view s) {
    bool neg = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      neg = s.front() == '-';
      s.remove_prefix(1);
    }
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
      base = 16;
      s.remove_prefix(2);
    }
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || p != s.data() + s.size() || v > 0xFFFFFFFFull) return std::nullopt;
    return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
  }

  // expr := number | label | label(+|-)number | %hi(expr) | %lo(expr)
  std::int64_t eval(const Statement& st, std::string_view s, bool need_symbols) const {
    s = trim(s);
    if (s.starts_with("%hi(") && s.ends_with(")")) {
      const auto v = static_cast<Word>(eval(st, s.substr(4, s.size() - 5), need_symbols));
      return (v >> 16) & 0xFFFF;
    }
    if (s.starts_with("%lo(") && s.ends_with(")")) {
      const auto v = static_cast<Word>(eval(st, s.substr(4, s.size() - 5), need_symbols));
      return v & 0xFFFF;
    }
    if (auto n = parse_number(s)) return *n;
    std::size_t end = 0;
    if (s.empty() || !ident_start(s[0])) fail(st, "bad expression '" + std::string(s) + "'");
    while (end < s.size() && ident_char(s[end])) ++end;
    const std::string name(s.substr(0, end));
    std::int64_t base = 0;
    if (need_symbols) {
      auto a = symbols_.address_of(name);
      if (!a) fail(st, "undefined label '" + name + "'");
      base = *a;
    }
    auto rest = trim(s.substr(end));
    if (rest.empty()) return base;
    if (rest.front() != '+' && rest.front() != '-') fail(st, "bad expression '" + std::string(s) + "'");
    const bool neg = rest.front() == '-';
    auto n = parse_number(trim(rest.substr(1)));
    if (!n) fail(st, "bad offset in '" + std::string(s) + "'");
    return neg ? base - *n : base + *n;
  }

  unsigned reg(const Statement& st, std::string_view s) const {
    s = trim(s);
    if (s.size() >= 2 && (s[0] == 'r' || s[0] == 'R')) {
      if (auto n = parse_number(s.substr(1)); n && *n >= 0 && *n < 32 && std::isdigit(static_cast<unsigned char>(s[1])))
        return static_cast<unsigned>(*n);
    }
    fail(st, "bad register '" + std::string(s) + "'");
  }

  void expect_operands(const Statement& st, std::size_t n) const {
    if (st.operands.size() != n)
      fail(st, st.mnemonic + " expects " + std::to_string(n) + " operand(s)");
  }

  void start_segment(Section s, Addr at) {
    cur_ = Segment{s, at, {}};
    segment_open_ = true;
  }

  void close_segment() {
    if (segment_open_ && !cur_.words.empty()) segments_.push_back(std::move(cur_));
    segment_open_ = false;
    cur_ = Segment{};
  }

  // Pass 1: addresses of labels and statements.
  void layout() {
    Location loc;
    addresses_.assign(prog_.statements.size(), std::nullopt);
    for (std::size_t idx = 0; idx < prog_.statements.size(); ++idx) {
      const auto& st = prog_.statements[idx];
      if (st.is_directive()) apply_section_directive(st, loc, /*emit=*/false);
      for (const auto& l : st.labels) {
        if (symbols_.labels.count(l)) fail(st, "duplicate label '" + l + "'");
        symbols_.labels[l] = Symbol{loc.counter(), space_of(loc.section)};
      }
      if (st.is_instruction()) {
        if (loc.section != Section::Text) fail(st, "instruction outside .text");
        addresses_[idx] = loc.text;
        loc.text += 4;
      } else if (st.mnemonic == ".word") {
        if (st.operands.empty()) fail(st, ".word expects a value");
        addresses_[idx] = loc.counter();
        loc.counter() += static_cast<Addr>(4 * st.operands.size());
      } else if (st.mnemonic == ".stack") {
        addresses_[idx] = loc.counter();
        loc.counter() += stack_bytes(st);
      }
    }
  }

  Addr stack_bytes(const Statement& st) const {
    expect_operands(st, 1);
    auto n = parse_number(st.operands[0]);
    if (!n || *n <= 0 || *n % 4 != 0) fail(st, ".stack size must be a positive multiple of 4");
    return static_cast<Addr>(*n);
  }

  // Handles section-changing directives; returns true if handled.
  bool apply_section_directive(const Statement& st, Location& loc, bool emit) {
    const auto& m = st.mnemonic;
    if (auto sec = section_from_name(std::string_view(m).substr(1)); sec && *sec != Section::Stack) {
      expect_operands(st, 0);
      loc.section = *sec;
      if (emit) {
        close_segment();
        start_segment(*sec, loc.counter());
      }
      return true;
    }
    if (m == ".org") {
      expect_operands(st, 1);
      auto a = parse_number(st.operands[0]);
      if (!a || *a < 0 || *a % 4 != 0) fail(st, ".org address must be word-aligned");
      loc.counter() = static_cast<Addr>(*a);
      if (emit) {
        close_segment();
        start_segment(loc.section, loc.counter());
      }
      return true;
    }
    return false;
  }

  void push_word(const Statement& st, Location& loc, Word w) {
    if (!segment_open_ || cur_.section != loc.section) {
      close_segment();
      start_segment(loc.section, loc.counter());
    }
    if (cur_.end() != loc.counter()) fail(st, "internal: location mismatch");
    cur_.words.push_back(w);
    loc.counter() += 4;
  }

  // Pass 2: encode.
  void emit() {
    Location loc;
    start_segment(Section::Text, 0);
    for (const auto& st : prog_.statements) {
      if (st.mnemonic.empty()) continue;
      if (st.is_directive()) {
        if (apply_section_directive(st, loc, true)) continue;
        if (st.mnemonic == ".word") {
          for (const auto& op : st.operands) {
            const auto v = eval(st, op, true);
            if (v < -0x80000000ll || v > 0xFFFFFFFFll) fail(st, "immediate overflow");
            push_word(st, loc, static_cast<Word>(v));
          }
        } else if (st.mnemonic == ".stack") {
          if (space_of(loc.section) != Space::Data) fail(st, ".stack outside a data section");
          const Section prev = loc.section;
          close_segment();
          start_segment(Section::Stack, loc.counter());
          loc.section = Section::Stack;
          for (Addr k = 0; k < stack_bytes(st) / 4; ++k) push_word(st, loc, 0);
          close_segment();
          loc.section = prev;
          start_segment(prev, loc.counter());
        } else if (st.mnemonic == ".jtargets") {
          jtargets(st);
        } else if (st.mnemonic == ".balance") {
          expect_operands(st, 2);
          for (const auto& l : st.operands)
            if (!symbols_.address_of(l)) fail(st, "undefined label '" + l + "'");
          symbols_.balance.push_back({st.operands[0], st.operands[1]});
        } else {
          fail(st, "unknown directive " + st.mnemonic);
        }
        continue;
      }
      const Addr pc = loc.text;
      push_word(st, loc, encode(instruction(st, pc)));
    }
    close_segment();
  }

  void jtargets(const Statement& st) {
    if (st.operands.empty()) fail(st, ".jtargets expects 'site: target, ...'");
    const auto& first = st.operands[0];
    const auto colon = first.find(':');
    if (colon == std::string::npos) fail(st, ".jtargets expects 'site: target, ...'");
    std::vector<std::string> names{std::string(trim(std::string_view(first).substr(colon + 1)))};
    for (std::size_t k = 1; k < st.operands.size(); ++k) names.push_back(st.operands[k]);
    const std::string site(trim(std::string_view(first).substr(0, colon)));
    auto site_addr = symbols_.address_of(site);
    if (!site_addr) fail(st, "undefined label '" + site + "'");
    auto& list = symbols_.jump_targets[*site_addr];
    for (const auto& n : names) {
      if (n.empty()) continue;
      auto a = symbols_.address_of(n);
      if (!a) fail(st, "undefined label '" + n + "'");
      list.push_back(*a);
    }
  }

  std::uint16_t simm16(const Statement& st, std::int64_t v) const {
    if (v < -32768 || v > 32767) fail(st, "immediate overflow (" + std::to_string(v) + ")");
    return static_cast<std::uint16_t>(v);
  }

  std::uint16_t uimm16(const Statement& st, std::int64_t v) const {
    if (v < 0 || v > 0xFFFF) fail(st, "immediate overflow (" + std::to_string(v) + ")");
    return static_cast<std::uint16_t>(v);
  }

  Addr code_target(const Statement& st, const std::string& s) const {
    const auto v = eval(st, s, true);
    if (v < 0 || v > 0xFFFFFFFFll) fail(st, "target out of range");
    if (v % 4 != 0) fail(st, "misaligned target");
    return static_cast<Addr>(v);
  }

  Instruction instruction(const Statement& st, Addr pc) const {
    auto op = op_from_mnemonic(st.mnemonic);
    if (st.mnemonic == "nop") {
      expect_operands(st, 0);
      return Instruction::nop();
    }
    if (!op) fail(st, "unknown mnemonic '" + st.mnemonic + "'");
    Instruction i;
    i.op = *op;
    const auto& o = st.operands;
    switch (*op) {
      case Op::Add: case Op::Sub: case Op::And: case Op::Or:
      case Op::Xor: case Op::Nor: case Op::Slt:
        expect_operands(st, 3);
        i.rd = reg(st, o[0]);
        i.rs = reg(st, o[1]);
        i.rt = reg(st, o[2]);
        break;
      case Op::Sll: case Op::Srl: {
        expect_operands(st, 3);
        i.rd = reg(st, o[0]);
        i.rt = reg(st, o[1]);
        const auto sh = eval(st, o[2], true);
        if (sh < 0 || sh > 31) fail(st, "shift amount out of range");
        i.shamt = static_cast<std::uint8_t>(sh);
        break;
      }
      case Op::Addi: case Op::Slti:
        expect_operands(st, 3);
        i.rt = reg(st, o[0]);
        i.rs = reg(st, o[1]);
        i.imm = simm16(st, eval(st, o[2], true));
        break;
      case Op::Andi: case Op::Ori: case Op::Xori:
        expect_operands(st, 3);
        i.rt = reg(st, o[0]);
        i.rs = reg(st, o[1]);
        i.imm = uimm16(st, eval(st, o[2], true));
        break;
      case Op::Lui:
        expect_operands(st, 2);
        i.rt = reg(st, o[0]);
        i.imm = uimm16(st, eval(st, o[1], true));
        break;
      case Op::Lw: case Op::Sw: {
        expect_operands(st, 2);
        i.rt = reg(st, o[0]);
        std::string_view mem = o[1];
        const auto lp = mem.rfind('(');
        if (lp == std::string_view::npos || mem.back() != ')') fail(st, "expected offset(rN)");
        i.rs = reg(st, mem.substr(lp + 1, mem.size() - lp - 2));
        const auto off = trim(mem.substr(0, lp));
        i.imm = off.empty() ? 0 : simm16(st, eval(st, off, true));
        break;
      }
      case Op::Beq: case Op::Bne: {
        expect_operands(st, 3);
        i.rs = reg(st, o[0]);
        i.rt = reg(st, o[1]);
        const Addr t = code_target(st, o[2]);
        const auto delta = (static_cast<std::int64_t>(t) - static_cast<std::int64_t>(pc) - 4) / 4;
        i.imm = simm16(st, delta);
        break;
      }
      case Op::J: case Op::Jal: {
        expect_operands(st, 1);
        const Addr t = code_target(st, o[0]);
        if ((t & 0xF0000000u) != ((pc + 4) & 0xF0000000u)) fail(st, "jump target out of region");
        i.target = (t >> 2) & 0x03FFFFFFu;
        break;
      }
      case Op::Jr:
        expect_operands(st, 1);
        i.rs = reg(st, o[0]);
        break;
      case Op::Mult:
        expect_operands(st, 2);
        i.rs = reg(st, o[0]);
        i.rt = reg(st, o[1]);
        break;
      case Op::Mfhi: case Op::Mflo:
        expect_operands(st, 1);
        i.rd = reg(st, o[0]);
        break;
      case Op::Chk: {
        expect_operands(st, 1);
        const auto v = eval(st, o[0], true);
        if (v < 0 || v >= (1 << 26)) fail(st, "chk payload exceeds 26 bits");
        i.target = static_cast<std::uint32_t>(v);
        break;
      }
      case Op::Syscall: case Op::Halt: case Op::StartBal: case Op::EndBal: case Op::Iret:
        expect_operands(st, 0);
        break;
    }
    return i;
  }

  const Program& prog_;
  SymbolTable symbols_;
  std::vector<std::optional<Addr>> addresses_;
  std::vector<Segment> segments_;
  Segment cur_;
  bool segment_open_ = false;
};

}  // namespace

Assembly assemble(const Program& program) { return Assembler(program).run(); }

Assembly assemble(std::string_view source) { return assemble(parse(source)); }

std::string disassemble(const MemoryImage& img) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "# entry 0x%08x\n", img.entry());
  os << buf;
  for (const auto& seg : img.segments()) {
    if (seg.section == Section::Stack) {
      os << ".data\n";
      std::snprintf(buf, sizeof buf, ".org 0x%x\n.stack %zu\n", seg.start, seg.words.size() * 4);
      os << buf;
      continue;
    }
    os << "." << section_name(seg.section) << "\n";
    std::snprintf(buf, sizeof buf, ".org 0x%x\n", seg.start);
    os << buf;
    for (std::size_t k = 0; k < seg.words.size(); ++k) {
      const Addr pc = seg.start + static_cast<Addr>(4 * k);
      const Word w = seg.words[k];
      std::optional<Instruction> ins;
      if (seg.section == Section::Text) ins = decode(w);
      if (ins) {
        os << "\t" << format_instruction(*ins, pc) << "\n";
      } else {
        std::snprintf(buf, sizeof buf, "\t.word 0x%08x\n", w);
        os << buf;
      }
    }
  }
  return os.str();
}

}  // namespace secured
