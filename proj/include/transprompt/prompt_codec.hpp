#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "transprompt/core_model.hpp"
#include "transprompt/selection.hpp"

namespace transprompt {

inline constexpr std::string_view kLabelCue = " is in class";

struct SerializationConfig {
  int decimals = 2;
  std::size_t token_budget = 4000;
  double chars_per_token = 4.0;

  void validate() const;
};

/// Known lines (Part 1), the test line (Part 2), and the plan that produced Part 1.
struct PromptBundle {
  std::string part1;
  std::string part2;
  SelectionPlan plan;
  std::size_t token_estimate = 0;

  std::string text() const { return part1 + part2; }
};

/// ceil(chars / chars_per_token).
std::size_t estimate_tokens(std::size_t chars, const SerializationConfig& cfg);

/// "[v0, v1, ...]" with exactly `decimals` fractional digits. Rounding is
/// correct on the exact binary value, so true decimal ties round to even.
std::string render_feature(const FeatureVector& f, const SerializationConfig& cfg);

/// One "<features> is in class <label>\n" line per plan entry, in plan order.
/// Throws BudgetError (with the largest k whose tail of the plan still fits)
/// when the estimate exceeds the budget.
std::string build_part1(const ReferenceSet& ref, const SelectionPlan& plan,
                        const SerializationConfig& cfg);

/// "<features> is in class\n".
std::string build_part2(const FeatureVector& f_test, const SerializationConfig& cfg);

/// Both parts with the budget enforced on their concatenation.
PromptBundle build_prompt(const ReferenceSet& ref, const SelectionPlan& plan,
                          const FeatureVector& f_test, const SerializationConfig& cfg);

/// First non-negative integer token of a completion. Throws CompletionError
/// (Unparseable or OutOfRange) carrying the raw text.
ClassLabel parse_completion(std::string_view completion, std::size_t class_count);

/// Inverse of render_feature. Throws ErrorKind::Grammar.
std::vector<double> parse_feature_text(std::string_view text);

struct ParsedPrompt {
  std::vector<std::vector<double>> known_features;
  std::vector<std::size_t> known_labels;
  std::vector<double> test_feature;
};

/// Reads a Part 1 + Part 2 prompt back into numbers. Throws ErrorKind::Grammar.
ParsedPrompt parse_prompt(std::string_view prompt);

}  // namespace transprompt
