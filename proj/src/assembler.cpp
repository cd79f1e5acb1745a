#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rmt/vm.hpp"

namespace rmt {
namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '.'; });
}


// Splits operands on commas that are outside brackets and quotes.
std::vector<std::string> split_operands(std::string_view s, std::size_t line) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      cur += c;
      if (c == '\\' && i + 1 < s.size()) {
        cur += s[++i];
      } else if (c == '"') {
        quoted = false;
      }
      continue;
    }
    if (c == '"') quoted = true;
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.emplace_back(trim(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  if (quoted) throw ParseError(line, "unterminated string literal");
  if (depth != 0) throw ParseError(line, "unbalanced brackets");
  if (!trim(cur).empty() || !out.empty()) out.emplace_back(trim(cur));
  return out;
}

// Parses a decimal or 0x-hex literal with optional sign into a wide value.
bool parse_number(std::string_view text, bool& negative, std::uint64_t& magnitude) {
  text = trim(text);
  negative = false;
  if (!text.empty() && (text[0] == '-' || text[0] == '+')) {
    negative = text[0] == '-';
    text.remove_prefix(1);
  }
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    base = 16;
    text.remove_prefix(2);
  }
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), magnitude, base);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

std::uint64_t parse_imm64(std::string_view text, std::size_t line) {
  bool neg = false;
  std::uint64_t mag = 0;
  if (!parse_number(text, neg, mag)) throw ParseError(line, "invalid immediate '" + std::string(text) + "'");
  if (neg) {
    if (mag > (std::uint64_t{1} << 63)) throw ParseError(line, "immediate out of range: " + std::string(text));
    return ~mag + 1;
  }
  return mag;
}

std::int64_t parse_signed(std::string_view text, std::int64_t lo, std::int64_t hi, std::size_t line) {
  bool neg = false;
  std::uint64_t mag = 0;
  if (!parse_number(text, neg, mag)) throw ParseError(line, "invalid immediate '" + std::string(text) + "'");
  std::uint64_t limit = static_cast<std::uint64_t>(hi);
  if (neg) limit = lo >= 0 ? 0 : static_cast<std::uint64_t>(-(lo + 1)) + 1;
  if (mag > limit) throw ParseError(line, "immediate out of range: " + std::string(text));
  const std::int64_t value = neg ? -static_cast<std::int64_t>(mag - 1) - 1 : static_cast<std::int64_t>(mag);
  return value;
}

std::uint8_t parse_register(std::string_view text, std::size_t line) {
  const std::string t = upper(trim(text));
  if (t.size() == 2 && t[0] == 'R' && t[1] >= '0' && t[1] < '0' + static_cast<char>(kRegisterCount)) {
    return static_cast<std::uint8_t>(t[1] - '0');
  }
  throw ParseError(line, "expected register r0..r7, got '" + std::string(text) + "'");
}

// "[rN]", "[rN+imm]", "[rN-imm]"
std::pair<std::uint8_t, std::uint64_t> parse_memory(std::string_view text, std::size_t line) {
  std::string t;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  }
  if (t.size() < 4 || t.front() != '[' || t.back() != ']') {
    throw ParseError(line, "expected memory operand [rN+imm], got '" + std::string(text) + "'");
  }
  const std::string inner = t.substr(1, t.size() - 2);
  const auto sign = inner.find_first_of("+-");
  const std::uint8_t base = parse_register(inner.substr(0, sign), line);
  std::int64_t offset = 0;
  if (sign != std::string::npos) {
    std::string_view disp(inner);
    disp.remove_prefix(sign);
    if (disp.size() > 1 && disp[0] == '+' && disp[1] == '-') disp.remove_prefix(1);  // [r1 + -8]
    offset = parse_signed(disp, std::numeric_limits<std::int32_t>::min(),
                          std::numeric_limits<std::int32_t>::max(), line);
  }
  return {base, static_cast<std::uint64_t>(offset)};
}

std::vector<std::uint8_t> parse_string(std::string_view text, std::size_t line) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '"' || text.back() != '"') {
    throw ParseError(line, "expected string literal");
  }
  text = text.substr(1, text.size() - 2);
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out.push_back(static_cast<std::uint8_t>(text[i]));
      continue;
    }
    if (++i >= text.size()) throw ParseError(line, "dangling escape");
    switch (text[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '0': out.push_back(0); break;
      case '\\': out.push_back('\\'); break;
      case '"': out.push_back('"'); break;
      case 'x': {
        if (i + 2 >= text.size()) throw ParseError(line, "short \\x escape");
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(text.data() + i + 1, text.data() + std::min(i + 3, text.size()), value, 16);
        if (ec != std::errc{} || ptr != text.data() + i + 3) throw ParseError(line, "bad \\x escape");
        out.push_back(static_cast<std::uint8_t>(value));
        i += 2;
        break;
      }
      default: throw ParseError(line, std::string("unknown escape \\") + text[i]);
    }
  }
  return out;
}

PageIndex parse_page(std::string_view text, std::size_t line) {
  const auto value = parse_signed(text, 0, kMaxPages - 1, line);
  return static_cast<PageIndex>(value);
}

void expect_operands(const std::vector<std::string>& ops, std::size_t n, std::string_view mnemonic, std::size_t line) {
  if (ops.size() != n) {
    throw ParseError(line, std::string(mnemonic) + " takes " + std::to_string(n) + " operand(s), got " +
                               std::to_string(ops.size()));
  }
}

}  // namespace

Program assemble(std::string_view source) {
  Program program;
  std::unordered_map<std::string, std::uint64_t> labels;
  struct Fixup {
    std::size_t instruction;
    std::string label;
    std::size_t line;
  };
  std::vector<Fixup> fixups;
  std::set<PageIndex> data_pages;

  std::size_t line_no = 0;
  std::istringstream in{std::string(source)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    // Strip comments outside string literals.
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"' && (i == 0 || raw[i - 1] != '\\')) quoted = !quoted;
      if (raw[i] == ';' && !quoted) {
        cut = i;
        break;
      }
    }
    std::string_view text = trim(std::string_view(raw).substr(0, cut));

    // Leading labels ("name:"), possibly several, possibly followed by code.
    while (true) {
      const auto colon = text.find(':');
      if (colon == std::string_view::npos) break;
      const auto candidate = trim(text.substr(0, colon));
      if (!is_identifier(candidate) || candidate.find_first_of(" \t[\"") != std::string_view::npos) break;
      const std::string name(candidate);
      if (labels.contains(name)) throw ParseError(line_no, "duplicate label '" + name + "'");
      labels[name] = program.code.size();
      text = trim(text.substr(colon + 1));
    }
    if (text.empty()) continue;

    const auto space = text.find_first_of(" \t");
    const std::string mnemonic = upper(text.substr(0, space));
    const auto ops = split_operands(space == std::string_view::npos ? std::string_view{} : text.substr(space + 1), line_no);

    if (mnemonic.starts_with('.')) {
      if (mnemonic == ".NAME") {
        expect_operands(ops, 1, ".name", line_no);
        program.name = ops[0];
      } else if (mnemonic == ".WSS") {
        expect_operands(ops, 1, ".wss", line_no);
        program.working_set_pages = static_cast<std::uint32_t>(parse_signed(ops[0], 0, kMaxPages, line_no));
      } else if (mnemonic == ".PAGE" || mnemonic == ".DATA" || mnemonic == ".RODATA") {
        InitialPage page;
        if (mnemonic == ".PAGE") {
          expect_operands(ops, 1, ".page", line_no);
        } else {
          expect_operands(ops, 2, mnemonic == ".DATA" ? ".data" : ".rodata", line_no);
          page.bytes = parse_string(ops[1], line_no);
          if (page.bytes.size() > kPageSize) throw ParseError(line_no, "data larger than one page");
        }
        page.page = parse_page(ops[0], line_no);
        page.writable = mnemonic != ".RODATA";
        if (!data_pages.insert(page.page).second) {
          throw ParseError(line_no, "page " + std::to_string(page.page) + " already declared");
        }
        program.initial_data.push_back(std::move(page));
      } else {
        throw ParseError(line_no, "unknown directive '" + mnemonic + "'");
      }
      continue;
    }

    Instruction ins;
    auto label_operand = [&](const std::string& label) {
      if (!is_identifier(label)) throw ParseError(line_no, "invalid label '" + label + "'");
      fixups.push_back({program.code.size(), label, line_no});
    };
    auto alu = [&](Opcode op) {
      expect_operands(ops, 2, mnemonic, line_no);
      ins.op = op;
      ins.a = parse_register(ops[0], line_no);
      ins.b = parse_register(ops[1], line_no);
    };

    if (mnemonic == "MOVI") {
      expect_operands(ops, 2, mnemonic, line_no);
      ins.op = Opcode::Movi;
      ins.a = parse_register(ops[0], line_no);
      ins.imm = parse_imm64(ops[1], line_no);
    } else if (mnemonic == "MOV") {
      alu(Opcode::Mov);
    } else if (mnemonic == "ADD") {
      alu(Opcode::Add);
    } else if (mnemonic == "SUB") {
      alu(Opcode::Sub);
    } else if (mnemonic == "MUL") {
      alu(Opcode::Mul);
    } else if (mnemonic == "XOR") {
      alu(Opcode::Xor);
    } else if (mnemonic == "AND") {
      alu(Opcode::And);
    } else if (mnemonic == "LD") {
      expect_operands(ops, 2, mnemonic, line_no);
      ins.op = Opcode::Ld;
      ins.a = parse_register(ops[0], line_no);
      std::tie(ins.b, ins.imm) = parse_memory(ops[1], line_no);
    } else if (mnemonic == "ST") {
      expect_operands(ops, 2, mnemonic, line_no);
      ins.op = Opcode::St;
      std::tie(ins.a, ins.imm) = parse_memory(ops[0], line_no);
      ins.b = parse_register(ops[1], line_no);
    } else if (mnemonic == "JNZ") {
      expect_operands(ops, 2, mnemonic, line_no);
      ins.op = Opcode::Jnz;
      ins.a = parse_register(ops[0], line_no);
      label_operand(ops[1]);
    } else if (mnemonic == "JMP") {
      expect_operands(ops, 1, mnemonic, line_no);
      ins.op = Opcode::Jmp;
      label_operand(ops[0]);
    } else if (mnemonic == "SYS") {
      expect_operands(ops, 1, mnemonic, line_no);
      ins.op = Opcode::Sys;
      ins.imm = static_cast<std::uint64_t>(parse_signed(ops[0], 0, kSyscallCount - 1, line_no));
    } else if (mnemonic == "HALT") {
      expect_operands(ops, 0, mnemonic, line_no);
      ins.op = Opcode::Halt;
    } else {
      throw ParseError(line_no, "unknown mnemonic '" + mnemonic + "'");
    }
    program.code.push_back(ins);
  }

  for (const auto& fix : fixups) {
    auto it = labels.find(fix.label);
    if (it == labels.end()) throw ParseError(fix.line, "undefined label '" + fix.label + "'");
    if (it->second >= program.code.size()) {
      throw ParseError(fix.line, "label '" + fix.label + "' does not precede an instruction");
    }
    program.code[fix.instruction].imm = it->second;
  }
  if (program.code.empty()) throw ParseError(line_no, "program has no instructions");
  return program;
}

Program load_program(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open program file " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  Program program = assemble(buf.str());
  if (program.name.empty()) program.name = path.stem().string();
  return program;
}

}  // namespace rmt
