#include "transprompt/prompt_codec.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

void SerializationConfig::validate() const {
  if (decimals < 1) throw_contract("decimals must be >= 1");
  if (token_budget == 0) throw_contract("token budget must be positive");
  if (!(chars_per_token > 0.0)) throw_contract("chars_per_token must be positive");
}

std::size_t estimate_tokens(std::size_t chars, const SerializationConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(chars) / cfg.chars_per_token));
}

namespace {

std::string render_value(double v, int decimals) {
  auto s = fmt::format("{:.{}f}", v, decimals);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string known_line(const ReferenceSet& ref, std::size_t i, const SerializationConfig& cfg) {
  return fmt::format("{}{} {}\n", render_feature(ref.feature(i), cfg), kLabelCue, ref.label(i).index);
}

std::vector<std::string> known_lines(const ReferenceSet& ref, const SelectionPlan& plan,
                                     const SerializationConfig& cfg) {
  cfg.validate();
  if (plan.ordered_indices.empty()) throw_contract("selection plan is empty (k must be >= 1)");
  std::vector<std::string> lines;
  lines.reserve(plan.ordered_indices.size());
  for (auto i : plan.ordered_indices) {
    if (i >= ref.size()) {
      throw_contract(fmt::format("plan index {} outside reference set of size {}", i, ref.size()));
    }
    lines.push_back(known_line(ref, i, cfg));
  }
  return lines;
}

/// Largest k' such that the last k' lines plus `reserved` characters fit the budget.
std::size_t largest_feasible_k(const std::vector<std::string>& lines, std::size_t reserved,
                               const SerializationConfig& cfg) {
  std::size_t chars = reserved;
  std::size_t k = 0;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (estimate_tokens(chars + it->size(), cfg) > cfg.token_budget) break;
    chars += it->size();
    ++k;
  }
  return k;
}

std::string join_checked(const std::vector<std::string>& lines, std::size_t reserved,
                         const SerializationConfig& cfg) {
  std::string out;
  for (const auto& l : lines) out += l;
  const auto tokens = estimate_tokens(out.size() + reserved, cfg);
  if (tokens > cfg.token_budget) {
    const auto k = largest_feasible_k(lines, reserved, cfg);
    throw BudgetError(k, fmt::format("prompt needs ~{} tokens, budget is {}; at most {} known "
                                     "samples fit",
                                     tokens, cfg.token_budget, k));
  }
  return out;
}

}  // namespace

std::string render_feature(const FeatureVector& f, const SerializationConfig& cfg) {
  std::string out = "[";
  for (std::size_t i = 0; i < f.dim(); ++i) {
    if (i > 0) out += ", ";
    out += render_value(f[i], cfg.decimals);
  }
  out += ']';
  return out;
}

std::string build_part1(const ReferenceSet& ref, const SelectionPlan& plan,
                        const SerializationConfig& cfg) {
  return join_checked(known_lines(ref, plan, cfg), 0, cfg);
}

std::string build_part2(const FeatureVector& f_test, const SerializationConfig& cfg) {
  return fmt::format("{}{}\n", render_feature(f_test, cfg), kLabelCue);
}

PromptBundle build_prompt(const ReferenceSet& ref, const SelectionPlan& plan,
                          const FeatureVector& f_test, const SerializationConfig& cfg) {
  if (f_test.dim() != ref.dim()) {
    throw_contract(fmt::format("test feature dimension {} differs from reference dimension {}",
                               f_test.dim(), ref.dim()));
  }
  PromptBundle bundle;
  bundle.part2 = build_part2(f_test, cfg);
  bundle.part1 = join_checked(known_lines(ref, plan, cfg), bundle.part2.size(), cfg);
  bundle.plan = plan;
  bundle.token_estimate = estimate_tokens(bundle.part1.size() + bundle.part2.size(), cfg);
  return bundle;
}

ClassLabel parse_completion(std::string_view completion, std::size_t class_count) {
  const std::string raw(completion);
  if (completion.empty()) throw CompletionError(ErrorKind::Unparseable, raw, "empty completion");
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  std::size_t pos = 0;
  while (pos < completion.size()) {
    if (!is_digit(completion[pos])) {
      ++pos;
      continue;
    }
    const std::size_t start = pos;
    while (pos < completion.size() && is_digit(completion[pos])) ++pos;
    const bool negative = start > 0 && completion[start - 1] == '-';
    const bool fractional = pos + 1 < completion.size() && completion[pos] == '.' &&
                            is_digit(completion[pos + 1]);
    if (fractional) {
      ++pos;
      while (pos < completion.size() && is_digit(completion[pos])) ++pos;
      continue;
    }
    if (negative) continue;
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(completion.data() + start, completion.data() + pos, value);
    if (ec != std::errc{} || value >= class_count) {
      throw CompletionError(ErrorKind::OutOfRange, raw,
                            fmt::format("completion names class {} but there are {} classes",
                                        completion.substr(start, pos - start), class_count));
    }
    return ClassLabel{value};
  }
  throw CompletionError(ErrorKind::Unparseable, raw, "completion contains no class index");
}

std::vector<double> parse_feature_text(std::string_view text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw Error(ErrorKind::Grammar, fmt::format("feature text '{}' is not bracketed", text));
  }
  std::vector<double> values;
  std::string_view body = text.substr(1, text.size() - 2);
  while (true) {
    const auto comma = body.find(',');
    std::string_view cell = body.substr(0, comma);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
      throw Error(ErrorKind::Grammar, fmt::format("'{}' is not a number in '{}'", cell, text));
    }
    values.push_back(v);
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return values;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
  ParsedPrompt parsed;
  std::vector<std::string_view> lines;
  while (!prompt.empty()) {
    const auto nl = prompt.find('\n');
    if (nl == std::string_view::npos) {
      lines.push_back(prompt);
      break;
    }
    lines.push_back(prompt.substr(0, nl));
    prompt.remove_prefix(nl + 1);
  }
  if (lines.size() < 2) throw Error(ErrorKind::Grammar, "prompt needs known lines and a test line");

  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = lines[n];
    const auto cue = line.rfind(kLabelCue);
    if (cue == std::string_view::npos) {
      throw Error(ErrorKind::Grammar, fmt::format("line {} lacks the label cue: '{}'", n + 1, line));
    }
    auto values = parse_feature_text(line.substr(0, cue));
    std::string_view tail = line.substr(cue + kLabelCue.size());
    const bool last = n + 1 == lines.size();
    if (last) {
      while (!tail.empty() && tail.front() == ' ') tail.remove_prefix(1);
      if (!tail.empty()) {
        throw Error(ErrorKind::Grammar, fmt::format("test line carries a label: '{}'", line));
      }
      parsed.test_feature = std::move(values);
      break;
    }
    if (tail.size() < 2 || tail.front() != ' ') {
      throw Error(ErrorKind::Grammar, fmt::format("line {} has no label: '{}'", n + 1, line));
    }
    tail.remove_prefix(1);
    std::size_t label = 0;
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), label);
    if (ec != std::errc{} || ptr != tail.data() + tail.size()) {
      throw Error(ErrorKind::Grammar, fmt::format("line {} label '{}' is not an integer", n + 1, tail));
    }
    if (!parsed.known_features.empty() && values.size() != parsed.known_features.front().size()) {
      throw Error(ErrorKind::Grammar, fmt::format("line {} has inconsistent dimension", n + 1));
    }
    parsed.known_features.push_back(std::move(values));
    parsed.known_labels.push_back(label);
  }
  if (parsed.test_feature.size() != parsed.known_features.front().size()) {
    throw Error(ErrorKind::Grammar, "test line dimension differs from known lines");
  }
  return parsed;
}

}  // namespace transprompt
