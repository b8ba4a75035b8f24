#include "keysim/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace keysim {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' ||
         c == '@';
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front())) return false;
  return std::all_of(s.begin() + 1, s.end(), is_ident_char);
}

std::optional<std::uint64_t> parse_hex_digits(std::string_view s) {
  if (s.empty() || s.size() > 16) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// `0x1f`, `31`, optionally negated. Negative values wrap to two's complement.
std::optional<std::uint64_t> parse_number(std::string_view s) {
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  std::optional<std::uint64_t> v;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    v = parse_hex_digits(s.substr(2));
  } else if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    std::uint64_t d = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d, 10);
    if (ec == std::errc{} && ptr == s.data() + s.size()) v = d;
  }
  if (v && negative) *v = ~*v + 1;
  return v;
}

std::optional<std::uint64_t> parse_address(std::string_view s) {
  if (s.size() < 3 || s[0] != '0' || s[1] != 'x') return std::nullopt;
  return parse_hex_digits(s.substr(2));
}

/// Splits at commas that are not nested in [] or {}.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '[' || c == '{') ++depth;
    if (c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  parts.push_back(trim(s.substr(start)));
  return parts;
}

[[noreturn]] void bad_operand(std::string_view text, const std::string& why) {
  throw std::invalid_argument("malformed operand '" + std::string{text} + "': " + why);
}

RegRef address_register(Arch arch, std::string_view name, std::string_view whole) {
  auto reg = lookup_register(arch, name);
  if (!reg) bad_operand(whole, "unknown register '" + std::string{name} + "'");
  if (reg->width != word_width(arch) || reg->shift != 0)
    bad_operand(whole, "address register must be full width");
  return *reg;
}

MemoryOperand parse_x86_memory(std::string_view inner, std::string_view whole) {
  MemoryOperand mem;
  std::size_t i = 0;
  bool first = true;
  auto skip_ws = [&] {
    while (i < inner.size() && std::isspace(static_cast<unsigned char>(inner[i]))) ++i;
  };
  for (skip_ws(); i < inner.size(); skip_ws()) {
    int sign = 1;
    if (inner[i] == '+' || inner[i] == '-') {
      if (first && inner[i] == '+') bad_operand(whole, "leading '+'");
      sign = inner[i] == '-' ? -1 : 1;
      ++i;
    } else if (!first) {
      bad_operand(whole, "expected '+' or '-'");
    }
    first = false;
    std::size_t end = inner.find_first_of("+-", i);
    if (end == std::string_view::npos) end = inner.size();
    std::string_view term = trim(inner.substr(i, end - i));
    i = end;
    if (term.empty()) bad_operand(whole, "empty address term");

    if (auto star = term.find('*'); star != std::string_view::npos) {
      std::string_view a = trim(term.substr(0, star));
      std::string_view b = trim(term.substr(star + 1));
      if (parse_number(a)) std::swap(a, b);
      auto scale = parse_number(b);
      if (!scale || (*scale != 1 && *scale != 2 && *scale != 4 && *scale != 8))
        bad_operand(whole, "scale must be 1, 2, 4 or 8");
      if (sign < 0 || mem.index) bad_operand(whole, "bad index term");
      mem.index = address_register(Arch::X86_64, a, whole);
      mem.scale = static_cast<unsigned>(*scale);
    } else if (auto num = parse_number(term)) {
      mem.disp += sign * static_cast<std::int64_t>(*num);
    } else {
      if (sign < 0) bad_operand(whole, "registers cannot be subtracted");
      RegRef reg = address_register(Arch::X86_64, term, whole);
      if (!mem.base) mem.base = reg;
      else if (!mem.index) mem.index = reg;
      else bad_operand(whole, "too many registers");
    }
  }
  if (first) bad_operand(whole, "empty memory operand");
  return mem;
}

Operand parse_x86_operand(std::string_view text) {
  std::string_view s = text;
  unsigned width = 0;
  static constexpr std::pair<std::string_view, unsigned> prefixes[] = {
      {"byte ptr", 8}, {"word ptr", 16}, {"dword ptr", 32}, {"qword ptr", 64}};
  for (auto [p, w] : prefixes) {
    if (s.starts_with(p)) {
      width = w;
      s = trim(s.substr(p.size()));
      if (!s.starts_with('[')) bad_operand(text, "size prefix must precede a memory operand");
      break;
    }
  }
  if (s.starts_with('[')) {
    if (!s.ends_with(']')) bad_operand(text, "missing ']'");
    MemoryOperand mem = parse_x86_memory(s.substr(1, s.size() - 2), text);
    mem.width = width;
    return {std::string{text}, mem};
  }
  if (auto reg = lookup_register(Arch::X86_64, s)) return {std::string{text}, RegisterOperand{*reg}};
  if (auto num = parse_number(s)) return {std::string{text}, ImmediateOperand{*num}};
  if (is_identifier(s)) return {std::string{text}, SymbolOperand{std::string{s}}};
  bad_operand(text, "not a register, immediate, memory reference or symbol");
}

std::uint64_t parse_arm_immediate(std::string_view s, std::string_view whole) {
  if (!s.starts_with('#')) bad_operand(whole, "ARM immediates start with '#'");
  auto v = parse_number(trim(s.substr(1)));
  if (!v) bad_operand(whole, "bad immediate");
  return *v;
}

Operand parse_arm_operand(std::string_view text) {
  std::string_view s = text;
  if (s.starts_with('[')) {
    if (!s.ends_with(']')) bad_operand(text, "missing ']'");
    auto parts = split_top_level(s.substr(1, s.size() - 2));
    if (parts.empty() || parts.size() > 2) bad_operand(text, "expected [rn] or [rn, offset]");
    MemoryOperand mem;
    mem.base = address_register(Arch::ARM32, parts[0], text);
    if (parts.size() == 2) {
      if (parts[1].starts_with('#')) {
        mem.disp = static_cast<std::int64_t>(parse_arm_immediate(parts[1], text));
      } else {
        mem.index = address_register(Arch::ARM32, parts[1], text);
      }
    }
    return {std::string{text}, mem};
  }
  if (s.starts_with('{')) {
    if (!s.ends_with('}')) bad_operand(text, "missing '}'");
    RegisterListOperand list;
    for (auto item : split_top_level(s.substr(1, s.size() - 2))) {
      if (auto dash = item.find('-'); dash != std::string_view::npos) {
        auto lo = lookup_register(Arch::ARM32, trim(item.substr(0, dash)));
        auto hi = lookup_register(Arch::ARM32, trim(item.substr(dash + 1)));
        if (!lo || !hi) bad_operand(text, "bad register range");
        int a = arm_register_number(lo->name), b = arm_register_number(hi->name);
        if (a > b) bad_operand(text, "descending register range");
        for (int r = a; r <= b; ++r)
          list.regs.push_back(RegRef{std::string{register_file(Arch::ARM32)[r]}, 32, 0});
      } else {
        auto reg = lookup_register(Arch::ARM32, item);
        if (!reg) bad_operand(text, "unknown register '" + std::string{item} + "'");
        list.regs.push_back(*reg);
      }
    }
    if (list.regs.empty()) bad_operand(text, "empty register list");
    return {std::string{text}, list};
  }
  if (s.starts_with('#')) return {std::string{text}, ImmediateOperand{parse_arm_immediate(s, text)}};
  if (auto reg = lookup_register(Arch::ARM32, s)) return {std::string{text}, RegisterOperand{*reg}};
  if (auto num = parse_number(s)) return {std::string{text}, ImmediateOperand{*num}};
  if (is_identifier(s)) return {std::string{text}, SymbolOperand{std::string{s}}};
  bad_operand(text, "not a register, immediate, memory reference or symbol");
}

/// Tokenizer over one line that keeps 1-based columns for error reporting.
class LineCursor {
 public:
  LineCursor(std::string_view line, std::size_t lineno) : line_(line), lineno_(lineno) {}

  std::string_view next_word() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
    last_col_ = start + 1;
    return line_.substr(start, pos_ - start);
  }

  std::string_view rest() {
    skip_ws();
    last_col_ = pos_ + 1;
    return trim(line_.substr(pos_));
  }

  bool at_end() {
    skip_ws();
    return pos_ >= line_.size();
  }

  std::size_t column() const { return last_col_; }
  std::size_t line() const { return lineno_; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(lineno_, last_col_, msg); }

 private:
  void skip_ws() {
    while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
  }

  std::string_view line_;
  std::size_t lineno_;
  std::size_t pos_ = 0;
  std::size_t last_col_ = 1;
};

/// `#` opens a comment at the start of a line or when followed by whitespace,
/// so ARM immediates such as `#4` survive.
std::string_view strip_comment(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '#') continue;
    bool line_start = trim(line.substr(0, i)).empty();
    bool spaced = i + 1 >= line.size() || std::isspace(static_cast<unsigned char>(line[i + 1]));
    if (line_start || spaced) return line.substr(0, i);
  }
  return line;
}

BlockId parse_block_id(LineCursor& cur, std::string_view s) {
  BlockId id = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id, 10);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    cur.fail("expected a decimal block id, got '" + std::string{s} + "'");
  return id;
}

std::string_view attribute(LineCursor& cur, std::string_view word, std::string_view key) {
  if (!word.starts_with(key) || word.size() <= key.size() || word[key.size()] != '=')
    cur.fail("expected '" + std::string{key} + "=...', got '" + std::string{word} + "'");
  return word.substr(key.size() + 1);
}

struct FunctionSite {
  std::size_t line;
  std::map<BlockId, std::size_t> block_lines;
};

}  // namespace

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

const BasicBlock* Function::find_block(BlockId id) const {
  for (const auto& b : blocks)
    if (b.id == id) return &b;
  return nullptr;
}

const BasicBlock& Function::block(BlockId id) const {
  if (const auto* b = find_block(id)) return *b;
  throw std::out_of_range("no block " + std::to_string(id) + " in function " + name);
}

const Function* Program::find(std::string_view name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

Operand parse_operand(std::string_view text, Arch arch) {
  text = trim(text);
  if (text.empty()) throw std::invalid_argument("empty operand");
  return arch == Arch::X86_64 ? parse_x86_operand(text) : parse_arm_operand(text);
}

bool is_conditional_branch(Arch arch, std::string_view m) {
  if (arch == Arch::X86_64) return m.size() > 1 && m.front() == 'j' && m != "jmp";
  static constexpr std::string_view conds[] = {"eq", "ne", "lt", "le", "gt", "ge", "hi", "ls",
                                               "hs", "lo", "cs", "cc", "mi", "pl"};
  if (m.size() != 3 || m.front() != 'b') return false;
  return std::find(std::begin(conds), std::end(conds), m.substr(1)) != std::end(conds);
}

Program parse_bundle(std::string_view text, std::string source_name) {
  Program program;
  program.source_name = std::move(source_name);
  bool have_header = false;
  Function* fn = nullptr;
  BasicBlock* blk = nullptr;
  std::vector<FunctionSite> sites;

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = strip_comment(raw);
    LineCursor cur(line, lineno);
    if (cur.at_end()) continue;

    std::string_view head = cur.next_word();
    if (head == "program") {
      if (have_header) cur.fail("duplicate 'program' header");
      std::string_view name = cur.next_word();
      if (name.empty()) cur.fail("missing program name");
      if (!cur.at_end()) cur.fail("unexpected text after program name");
      program.source_name = std::string{name};
      have_header = true;
      continue;
    }
    if (!have_header) cur.fail("document must start with a 'program' header");

    if (head == "function") {
      std::string_view name = cur.next_word();
      if (name.empty()) cur.fail("missing function name");
      if (program.find(name)) cur.fail("duplicate function '" + std::string{name} + "'");
      Function f;
      f.name = std::string{name};
      std::string_view w = cur.next_word();
      auto arch = parse_arch(attribute(cur, w, "arch"));
      if (!arch) cur.fail("unknown arch tag '" + std::string{attribute(cur, w, "arch")} + "'");
      f.arch = *arch;
      f.convention = default_convention(*arch);
      w = cur.next_word();
      if (w.starts_with("cc=")) {
        auto conv = parse_convention(attribute(cur, w, "cc"));
        if (!conv) cur.fail("unknown calling convention '" + std::string{w.substr(3)} + "'");
        if (!convention_matches(*arch, *conv)) cur.fail("calling convention does not fit the arch");
        f.convention = *conv;
        w = cur.next_word();
      }
      f.entry = parse_block_id(cur, attribute(cur, w, "entry"));
      if (!cur.at_end()) {
        cur.next_word();
        cur.fail("unexpected attribute");
      }
      program.functions.push_back(std::move(f));
      fn = &program.functions.back();
      blk = nullptr;
      sites.push_back({lineno, {}});
      continue;
    }

    if (head == "block") {
      if (!fn) cur.fail("'block' outside of a function");
      BasicBlock b;
      b.id = parse_block_id(cur, cur.next_word());
      if (fn->find_block(b.id)) cur.fail("duplicate block id " + std::to_string(b.id));
      std::string_view at = cur.next_word();
      auto addr = at.starts_with('@') ? parse_address(at.substr(1)) : std::nullopt;
      if (!addr) cur.fail("expected '@0x<hex-addr>'");
      b.address = *addr;
      std::string_view succ = attribute(cur, cur.next_word(), "succ");
      if (!succ.empty()) {
        std::size_t start = 0;
        while (start <= succ.size()) {
          std::size_t comma = succ.find(',', start);
          std::string_view item = succ.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
          start = comma == std::string_view::npos ? succ.size() + 1 : comma + 1;
          auto colon = item.find(':');
          if (colon == std::string_view::npos) cur.fail("successor must be '<id>:<kind>'");
          Edge e;
          e.target = parse_block_id(cur, item.substr(0, colon));
          std::string_view kind = item.substr(colon + 1);
          if (kind == "ft") e.kind = EdgeKind::Fallthrough;
          else if (kind == "taken") e.kind = EdgeKind::Taken;
          else if (kind == "jmp") e.kind = EdgeKind::Unconditional;
          else cur.fail("unknown edge kind '" + std::string{kind} + "'");
          b.successors.push_back(e);
        }
      }
      if (!cur.at_end()) {
        cur.next_word();
        cur.fail("unexpected text after successor list");
      }
      fn->blocks.push_back(std::move(b));
      blk = &fn->blocks.back();
      sites.back().block_lines[blk->id] = lineno;
      continue;
    }

    auto addr = parse_address(head);
    if (!addr) cur.fail("expected 'program', 'function', 'block' or an instruction address");
    if (!blk) cur.fail("instruction outside of a block");
    Instruction ins;
    ins.address = *addr;
    std::string_view mnemonic = cur.next_word();
    if (mnemonic.empty()) cur.fail("missing mnemonic");
    if (!std::all_of(mnemonic.begin(), mnemonic.end(), [](char c) {
          return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '.';
        }))
      cur.fail("mnemonic must be lowercase");
    ins.mnemonic = std::string{mnemonic};
    std::string_view ops = cur.rest();
    if (!ops.empty()) {
      for (auto part : split_top_level(ops)) {
        if (part.empty()) cur.fail("empty operand");
        try {
          ins.operands.push_back(parse_operand(part, fn->arch));
        } catch (const std::invalid_argument& e) {
          cur.fail(e.what());
        }
      }
    }
    blk->instructions.push_back(std::move(ins));
  }

  if (!have_header) throw ParseError(lineno, 1, "document must start with a 'program' header");

  for (std::size_t i = 0; i < program.functions.size(); ++i) {
    const Function& f = program.functions[i];
    for (const auto& b : f.blocks) {
      for (const auto& e : b.successors) {
        if (!f.find_block(e.target))
          throw ParseError(sites[i].block_lines[b.id], 1,
                           "block " + std::to_string(b.id) + " lists successor " +
                               std::to_string(e.target) + ", which does not exist");
      }
    }
    for (const auto& d : validate_cfg(f)) {
      if (d.severity == Severity::Error)
        throw ParseError(sites[i].line, 1, "function " + f.name + ": " + to_string(d));
    }
  }
  return program;
}

Program load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_bundle(ss.str(), path.filename().string());
}

std::string serialize_bundle(const Program& program) {
  std::ostringstream out;
  out << "program " << program.source_name << "\n";
  for (const auto& f : program.functions) {
    out << "\nfunction " << f.name << " arch=" << to_string(f.arch) << " cc=" << to_string(f.convention)
        << " entry=" << f.entry << "\n";
    for (const auto& b : f.blocks) {
      out << "block " << b.id << " @" << hex(b.address) << " succ=";
      for (std::size_t i = 0; i < b.successors.size(); ++i) {
        const auto& e = b.successors[i];
        out << (i ? "," : "") << e.target << ":"
            << (e.kind == EdgeKind::Fallthrough ? "ft" : e.kind == EdgeKind::Taken ? "taken" : "jmp");
      }
      out << "\n";
      for (const auto& ins : b.instructions) {
        out << "  " << hex(ins.address) << " " << ins.mnemonic;
        for (std::size_t i = 0; i < ins.operands.size(); ++i)
          out << (i ? ", " : " ") << ins.operands[i].text;
        out << "\n";
      }
    }
  }
  return out.str();
}

std::vector<Diagnostic> validate_cfg(const Function& f) {
  std::vector<Diagnostic> diags;
  auto block_name = [](BlockId id) { return "block " + std::to_string(id); };

  std::set<BlockId> ids;
  for (const auto& b : f.blocks)
    if (!ids.insert(b.id).second) diags.push_back(Diagnostic::error("duplicate " + block_name(b.id)));
  if (!ids.count(f.entry))
    diags.push_back(Diagnostic::error("entry " + block_name(f.entry) + " does not exist"));

  std::set<std::uint64_t> addresses;
  for (const auto& b : f.blocks) {
    if (b.instructions.empty()) diags.push_back(Diagnostic::error(block_name(b.id) + " has no instructions"));
    if (b.successors.size() > 2)
      diags.push_back(Diagnostic::error(block_name(b.id) + " has " + std::to_string(b.successors.size()) +
                                        " successors (at most 2 allowed)"));
    if (b.successors.size() == 2 &&
        (b.instructions.empty() || !is_conditional_branch(f.arch, b.instructions.back().mnemonic)))
      diags.push_back(Diagnostic::error(block_name(b.id) + " has 2 successors but does not end in a conditional branch"));
    for (const auto& e : b.successors)
      if (!ids.count(e.target))
        diags.push_back(Diagnostic::error(block_name(b.id) + " lists successor " + std::to_string(e.target) +
                                          ", which does not exist"));
    for (std::size_t i = 0; i < b.instructions.size(); ++i) {
      const auto& ins = b.instructions[i];
      if (i > 0 && ins.address <= b.instructions[i - 1].address)
        diags.push_back(Diagnostic::error("instruction addresses are not increasing in " + block_name(b.id), ins.address));
      if (!addresses.insert(ins.address).second)
        diags.push_back(Diagnostic::error("duplicate instruction address", ins.address));
    }
  }

  if (ids.count(f.entry)) {
    std::set<BlockId> seen{f.entry};
    std::queue<BlockId> work;
    work.push(f.entry);
    while (!work.empty()) {
      const BasicBlock* b = f.find_block(work.front());
      work.pop();
      if (!b) continue;
      for (const auto& e : b->successors)
        if (seen.insert(e.target).second) work.push(e.target);
    }
    for (const auto& b : f.blocks)
      if (!seen.count(b.id))
        diags.push_back(Diagnostic::warning(block_name(b.id) + " is unreachable from the entry"));
  }
  return diags;
}

}  // namespace keysim
