#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "failopt/corpus/types.hpp"

namespace failopt::corpus {

// One object per line: {id, question, human_answer, generations: {attack: text}}.
void to_json(nlohmann::json& j, const QARecord& r);
void from_json(const nlohmann::json& j, QARecord& r);

DatasetSplit load_jsonl(const std::filesystem::path& path, SplitName name = SplitName::Train);
void save_jsonl(const DatasetSplit& split, const std::filesystem::path& path);

}  // namespace failopt::corpus
