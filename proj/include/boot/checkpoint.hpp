#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "boot/params.hpp"
#include "boot/rng.hpp"
#include "boot/schedule.hpp"
#include "boot/student.hpp"
#include "boot/teacher.hpp"

namespace boot {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

/// Thrown for unreadable or malformed files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ParamSet <-> JSON. Values are written with round-trip precision.
json layer_plan_to_json(const ParamSet& params);
json tensors_to_json(const ParamSet& params, const Tensor ParamSet::Entry::*field);
json opt_state_to_json(const ParamSet& params);
/// Restores values, EMA shadow and optimizer state from a checkpoint document.
ParamSet params_from_checkpoint(const json& doc);

json schedule_to_json(const NoiseSchedule& sched);
NoiseSchedule schedule_from_json(const json& j);

json teacher_checkpoint(const DenoiserNet& teacher, const Rng* rng = nullptr);
DenoiserNet teacher_from_checkpoint(const json& doc);

json student_checkpoint(const StudentNet& student, const Rng* rng = nullptr);
/// Restores the student and, when `rng` is given and the file has one, the random stream.
StudentNet student_from_checkpoint(const json& doc, Rng* rng = nullptr);

json read_json(const std::filesystem::path& path);
/// Writes `doc` followed by a newline; identical documents give identical bytes.
void write_json(const std::filesystem::path& path, const json& doc);

}  // namespace boot
