#pragma once

// On-disk formats: per-agent frame log directories, scenario and run-record
// JSON.

#include <filesystem>
#include <string>
#include <vector>

#include "v2xl/replay.hpp"
#include "v2xl/scenario.hpp"

namespace v2xl {

// <dir>/agent_<id>/manifest.txt and frame_<k>.bin per frame. Points are
// stored as f32, so a reload equals the original only after rounding.
void save_frame_log(const std::filesystem::path& dir, const FrameLog& log);
FrameLog load_frame_log(const std::filesystem::path& dir);
void save_frame_logs(const std::filesystem::path& root, const std::vector<FrameLog>& logs);
std::vector<FrameLog> load_frame_logs(const std::filesystem::path& root);

// The log after a save/load cycle: coordinates rounded to f32.
FrameLog round_to_disk(FrameLog log);

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
std::string record_to_json(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_json(const std::string& text);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace v2xl
