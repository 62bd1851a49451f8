#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace iur {

// Per-token editing operation over the linearized dialogue stream.
// NA must stay 0: label heads and guidance read index 0 as "untouched".
enum class EditLabel : int {
  NA = 0,  // not involved in any edit
  RP = 1,  // token in the incomplete utterance that gets replaced
  NW = 2,  // history token that supplies a replacement
  IN = 3,  // history token that supplies an insertion
};

inline const char* to_string(EditLabel l) {
  switch (l) {
    case EditLabel::NA: return "NA";
    case EditLabel::RP: return "RP";
    case EditLabel::NW: return "NW";
    case EditLabel::IN: return "IN";
  }
  return "NA";
}

inline std::optional<EditLabel> edit_label_from(std::string_view s) {
  if (s == "NA") return EditLabel::NA;
  if (s == "RP") return EditLabel::RP;
  if (s == "NW") return EditLabel::NW;
  if (s == "IN") return EditLabel::IN;
  return std::nullopt;
}

}  // namespace iur
