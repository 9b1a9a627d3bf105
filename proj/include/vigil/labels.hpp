#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace vigil {

// Integer codes are fixed (not alphabetical) and written into every
// serialized model.
enum class VigilanceState : int { Wake = 0, SWS = 1, REM = 2 };

inline constexpr int kNumStates = 3;

inline constexpr std::array<VigilanceState, kNumStates> kAllStates = {
    VigilanceState::Wake, VigilanceState::SWS, VigilanceState::REM};

constexpr int code(VigilanceState s) { return static_cast<int>(s); }

std::string_view to_string(VigilanceState s);

/// Parses "Wake", "SWS" or "REM" (exact, case-sensitive). Throws LabelError.
VigilanceState state_from_string(std::string_view text);

/// Throws LabelError for codes outside 0..2.
VigilanceState state_from_code(int c);

/// Empty text maps to an unlabeled epoch.
std::optional<VigilanceState> parse_optional_label(std::string_view text);

/// "Wake=0 SWS=1 REM=2", the form embedded in model files and manifests.
std::string label_map_text();

/// Validates a label map read back from a file against the fixed codes.
void check_label_map_text(std::string_view text);

}  // namespace vigil
