#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

namespace rifair {

// Fairness-accuracy confusion classes. "True/False" is whether the perturbed
// instance is predicted correctly; "Fair/Biased" is whether every similar
// individual receives the same label.
enum class OutcomeClass { kTF, kFF, kTB, kFB };

inline constexpr std::array<OutcomeClass, 4> kAllOutcomes{OutcomeClass::kTF, OutcomeClass::kFF, OutcomeClass::kTB,
                                                          OutcomeClass::kFB};

constexpr bool is_accurate(OutcomeClass c) { return c == OutcomeClass::kTF || c == OutcomeClass::kTB; }
constexpr bool is_fair(OutcomeClass c) { return c == OutcomeClass::kTF || c == OutcomeClass::kFF; }
constexpr std::size_t index_of(OutcomeClass c) { return static_cast<std::size_t>(c); }

std::string_view to_string(OutcomeClass c);
std::optional<OutcomeClass> parse_outcome(std::string_view s);

// `similar_labels` are the predicted labels over I(v_adv), v_adv included.
// Throws std::invalid_argument when it is empty.
OutcomeClass classify_outcome(int y, int pred_label_adv, std::span<const int> similar_labels);

}  // namespace rifair
