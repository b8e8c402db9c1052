#include "skbf/triplet.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>

#include "skbf/errors.hpp"
#include "skbf/text.hpp"

namespace skbf {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        out += c;
    }
  }
  out += '"';
  return out;
}

bool needs_quoting(std::string_view label) {
  if (label.empty() || label != trim(label)) return true;
  return label.find_first_of(",()\"\\\n\r\t") != std::string_view::npos || label.front() == '?';
}

/// Recursive-descent reader over a single grammar line.
class LineReader {
 public:
  explicit LineReader(std::string_view s) : s_(s) {}

  void skip_space() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }
  bool consume(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool at_end() {
    skip_space();
    return pos_ == s_.size();
  }

  std::optional<std::string> quoted() {
    skip_space();
    if (pos_ >= s_.size() || s_[pos_] != '"') return std::nullopt;
    ++pos_;
    std::string out;
    while (pos_ < s_.size()) {
      char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= s_.size()) return std::nullopt;
      char e = s_[pos_++];
      switch (e) {
        case 'n':
          out += '\n';
          break;
        case 'r':
          out += '\r';
          break;
        case 't':
          out += '\t';
          break;
        case '"':
        case '\\':
          out += e;
          break;
        default:
          return std::nullopt;
      }
    }
    return std::nullopt;
  }

  /// Text up to the next ',' or ')' (exclusive), trimmed.
  std::string bare() {
    skip_space();
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ')' && s_[pos_] != '"') ++pos_;
    return std::string(trim(s_.substr(start, pos_ - start)));
  }

  std::optional<std::string> name() {
    if (pos_ >= s_.size() || !is_name_start(s_[pos_])) return std::nullopt;
    const auto start = pos_;
    while (pos_ < s_.size() && is_name_char(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  std::optional<Term> term() {
    skip_space();
    if (pos_ >= s_.size()) return std::nullopt;
    if (s_[pos_] == '"') {
      auto q = quoted();
      if (!q) return std::nullopt;
      return Constant{std::move(*q)};
    }
    if (s_[pos_] != '?') return std::nullopt;
    ++pos_;
    auto n = name();
    if (!n || pos_ >= s_.size() || s_[pos_] != ':') return std::nullopt;
    ++pos_;
    std::string type = bare();
    if (type.empty()) return std::nullopt;
    return Variable{std::move(*n), std::move(type)};
  }

  std::optional<std::string> label() {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == '"') return quoted();
    std::string b = bare();
    if (b.empty()) return std::nullopt;
    return b;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

/// Drops list decorations LLMs like to add: "- ", "* ", "1. ", "2) ",
/// and trailing ',' / ';' / '.'.
std::string_view strip_decorations(std::string_view line) {
  line = trim(line);
  if (!line.empty() && (line.front() == '-' || line.front() == '*')) {
    line = trim(line.substr(1));
  } else {
    std::size_t digits = 0;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
      line = trim(line.substr(digits + 1));
    }
  }
  while (!line.empty() && (line.back() == ',' || line.back() == ';' || line.back() == '.')) {
    line = trim(line.substr(0, line.size() - 1));
  }
  return line;
}

std::optional<Triplet> parse_triplet_line(std::string_view line) {
  LineReader r(line);
  if (!r.consume('(')) return std::nullopt;
  auto head = r.term();
  if (!head || !r.consume(',')) return std::nullopt;
  auto edge = r.label();
  if (!edge || !r.consume(',')) return std::nullopt;
  auto tail = r.term();
  if (!tail || !r.consume(')') || !r.at_end()) return std::nullopt;
  return Triplet{std::move(*head), std::move(*edge), std::move(*tail)};
}

bool starts_with_target(std::string_view line) {
  if (line.size() < 6) return false;
  for (std::size_t i = 0; i < 6; ++i) {
    if (std::toupper(static_cast<unsigned char>(line[i])) != "TARGET"[i]) return false;
  }
  return line.size() == 6 || is_space(line[6]) || line[6] == ':' || line[6] == '?';
}

/// `TARGET ?name` or `TARGET ?name:type`, optionally with a colon after TARGET.
std::optional<std::string> parse_target_line(std::string_view line) {
  std::string_view rest = trim(line.substr(6));
  if (!rest.empty() && rest.front() == ':') rest = trim(rest.substr(1));
  LineReader r(rest);
  if (!r.consume('?')) return std::nullopt;
  auto n = r.name();
  if (!n) return std::nullopt;
  if (r.consume(':')) {
    if (r.bare().empty()) return std::nullopt;
  }
  if (!r.at_end()) return std::nullopt;
  return n;
}

}  // namespace

bool is_variable(const Term& t) noexcept { return std::holds_alternative<Variable>(t); }
bool is_constant(const Term& t) noexcept { return std::holds_alternative<Constant>(t); }

std::string format_term(const Term& t) {
  if (const auto* v = std::get_if<Variable>(&t)) return "?" + v->name + ":" + v->var_type;
  return quote(std::get<Constant>(t).surface);
}

std::string format_triplet(const Triplet& t) {
  const std::string edge = needs_quoting(t.edge_type) ? quote(t.edge_type) : t.edge_type;
  return "(" + format_term(t.head) + ", " + edge + ", " + format_term(t.tail) + ")";
}

std::string to_grammar(const TripletSet& set) {
  std::string out;
  for (const auto& t : set.triplets) out += format_triplet(t) + "\n";
  out += "TARGET ?" + set.target.name;
  return out;
}

std::string_view extraction_system_prompt() noexcept {
  return "You translate questions into relational triplets over a typed knowledge graph. "
         "Answer only in the requested triplet format.";
}

std::string_view extraction_retry_suffix() noexcept {
  return "\n\nYour previous reply could not be parsed. Reply again with only triplet lines "
         "in the format above followed by a single TARGET line.";
}

std::string build_extraction_prompt(std::string_view query, const Schema& schema) {
  if (trim(query).empty()) throw std::invalid_argument("extraction prompt needs a non-empty query");
  if (schema.node_types.empty()) {
    throw std::invalid_argument("extraction prompt needs at least one node type");
  }
  auto join = [](const std::set<std::string>& labels) {
    std::string out;
    for (const auto& l : labels) {
      if (!out.empty()) out += ", ";
      out += l;
    }
    return out;
  };

  std::string p;
  p += "Formalize the question below as relational triplets over a knowledge graph.\n\n";
  p += "Node types: " + join(schema.node_types) + "\n";
  p += "Edge types: " + join(schema.edge_types) + "\n\n";
  p += "Format (" + std::string(kTripletGrammarVersion) + "):\n";
  p += "- Write one triplet per line as (<head>, <edge_type>, <tail>). The edge points from head "
       "to tail.\n";
  p += "- <edge_type> must be one of the edge types listed above.\n";
  p += "- A term is either a constant, a specific named entity written as a double-quoted string "
       "such as \"Some Name\", or a variable, an unknown entity written as ?name:node_type with a "
       "node type listed above.\n";
  p += "- Use the same variable name wherever the same unknown entity appears.\n";
  p += "- End with one line TARGET ?name naming the variable that denotes the answer.\n\n";
  p += "Question: ";
  p += query;
  p += "\n";
  return p;
}

TripletSet parse_triplet_response(std::string_view raw, const Schema& schema,
                                  std::vector<ParseNote>* notes) {
  auto note = [&](std::size_t line, std::string_view text, std::string message) {
    if (notes) notes->push_back(ParseNote{line, std::string(text), std::move(message)});
  };

  std::vector<std::pair<Triplet, std::size_t>> parsed;
  std::optional<std::string> target_name;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= raw.size()) {
    const auto nl = raw.find('\n', start);
    const auto end = nl == std::string_view::npos ? raw.size() : nl;
    const std::string_view original = raw.substr(start, end - start);
    start = end + 1;
    ++line_no;

    std::string_view line = trim(original);
    if (line.empty()) {
      if (nl == std::string_view::npos) break;
      continue;
    }
    if (starts_with_target(line)) {
      auto name = parse_target_line(line);
      if (!name) {
        note(line_no, original, "malformed TARGET line ignored");
      } else if (target_name) {
        note(line_no, original, "additional TARGET line ignored");
      } else {
        target_name = std::move(name);
      }
    } else {
      line = strip_decorations(line);
      if (auto t = parse_triplet_line(line)) {
        parsed.emplace_back(std::move(*t), line_no);
      } else if (!line.empty() && line.front() == '(') {
        note(line_no, original, "malformed triplet line ignored");
      }
    }
    if (nl == std::string_view::npos) break;
  }

  if (parsed.empty()) throw ExtractionFormatError("reply contains no parsable triplet line");
  if (!target_name) throw ExtractionFormatError("reply contains no TARGET line");

  std::map<std::string, std::string> variable_types;
  auto check_variable = [&](const Term& term) {
    const auto* v = std::get_if<Variable>(&term);
    if (!v) return;
    if (!schema.node_types.contains(v->var_type)) {
      throw ExtractionFormatError("variable ?" + v->name + " has undeclared node type '" +
                                  v->var_type + "'");
    }
    auto [it, inserted] = variable_types.emplace(v->name, v->var_type);
    if (!inserted && it->second != v->var_type) {
      throw ExtractionFormatError("variable ?" + v->name + " used with types '" + it->second +
                                  "' and '" + v->var_type + "'");
    }
  };

  TripletSet out;
  for (auto& [triplet, line] : parsed) {
    check_variable(triplet.head);
    check_variable(triplet.tail);
    if (schema.edge_types.contains(triplet.edge_type)) {
      out.triplets.push_back(std::move(triplet));
      continue;
    }
    const std::string wanted = text::normalize(triplet.edge_type);
    const std::u32string wanted_cp = text::to_code_points(wanted);
    const std::string* best = nullptr;
    double best_score = -1.0;
    for (const auto& declared : schema.edge_types) {
      const double score =
          text::edit_similarity(wanted_cp, text::to_code_points(text::normalize(declared)));
      if (score > best_score) {
        best_score = score;
        best = &declared;
      }
    }
    if (best && best_score >= kEdgeRepairThreshold) {
      note(line, format_triplet(triplet),
           "edge type '" + triplet.edge_type + "' repaired to '" + *best + "'");
      triplet.edge_type = *best;
      out.triplets.push_back(std::move(triplet));
    } else {
      note(line, format_triplet(triplet),
           "triplet dropped: unknown edge type '" + triplet.edge_type + "'");
    }
  }

  auto uses_target = [&](const Term& term) {
    const auto* v = std::get_if<Variable>(&term);
    return v && v->name == *target_name;
  };
  for (const auto& t : out.triplets) {
    if (uses_target(t.head)) {
      out.target = std::get<Variable>(t.head);
      return out;
    }
    if (uses_target(t.tail)) {
      out.target = std::get<Variable>(t.tail);
      return out;
    }
  }
  throw ExtractionFormatError("TARGET ?" + *target_name + " does not occur in any kept triplet");
}

}  // namespace skbf
