#include "vigil/labels.hpp"

#include <sstream>

#include "vigil/errors.hpp"

namespace vigil {

std::string_view to_string(VigilanceState s) {
  switch (s) {
    case VigilanceState::Wake:
      return "Wake";
    case VigilanceState::SWS:
      return "SWS";
    case VigilanceState::REM:
      return "REM";
  }
  return "?";
}

VigilanceState state_from_string(std::string_view text) {
  for (auto s : kAllStates) {
    if (text == to_string(s)) return s;
  }
  throw LabelError("unknown vigilance label '" + std::string(text) +
                   "' (expected Wake, SWS or REM)");
}

VigilanceState state_from_code(int c) {
  if (c < 0 || c >= kNumStates) {
    throw LabelError("label code " + std::to_string(c) + " outside 0.." +
                     std::to_string(kNumStates - 1));
  }
  return static_cast<VigilanceState>(c);
}

std::optional<VigilanceState> parse_optional_label(std::string_view text) {
  if (text.empty()) return std::nullopt;
  return state_from_string(text);
}

std::string label_map_text() {
  std::ostringstream os;
  for (int i = 0; i < kNumStates; ++i) {
    if (i) os << ' ';
    os << to_string(kAllStates[i]) << '=' << i;
  }
  return os.str();
}

void check_label_map_text(std::string_view text) {
  if (text != label_map_text()) {
    throw LabelError("label map '" + std::string(text) +
                     "' does not match this build's '" + label_map_text() +
                     "'");
  }
}

}  // namespace vigil
