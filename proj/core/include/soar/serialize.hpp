#pragma once

// Lossless text encodings of the run artifacts. Doubles are written with
// shortest round-trip precision, so decode(encode(x)) == x bit for bit.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "soar/env.hpp"
#include "soar/outer_loop.hpp"

namespace soar {

std::string encode_step_report(const StepReport& report);  // one line, no trailing newline
StepReport decode_step_report(std::string_view line);

std::string encode_tasks(const std::vector<Task>& tasks);
std::vector<Task> decode_tasks(std::string_view text);

std::string encode_pairs(const std::vector<QAPair>& pairs);
std::vector<QAPair> decode_pairs(std::string_view text);

std::string encode_student(const StudentState& student);
StudentState decode_student(std::string_view text);

std::string encode_teacher(const TeacherState& teacher);
TeacherState decode_teacher(std::string_view text);

std::string encode_ledger(const PromotionLedger& ledger);
PromotionLedger decode_ledger(std::string_view text);

/// Whole-file helpers. write_file_atomic writes a sibling temp file and renames it.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void append_line(const std::filesystem::path& path, std::string_view line);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace soar
