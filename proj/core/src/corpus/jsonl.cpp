#include "failopt/corpus/jsonl.hpp"

#include <fstream>

#include "failopt/error.hpp"

namespace failopt::corpus {

void to_json(nlohmann::json& j, const QARecord& r) {
  j = nlohmann::json{{"id", r.id},
                     {"question", r.question},
                     {"human_answer", r.human_answer},
                     {"generations", r.generations}};
}

void from_json(const nlohmann::json& j, QARecord& r) {
  if (!j.is_object()) throw Error(Errc::Parse, "record is not a JSON object");
  for (const char* key : {"id", "question", "human_answer"}) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw Error(Errc::MissingField, std::string("missing string field '") + key + "'");
    }
  }
  r.id = j.at("id").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.human_answer = j.at("human_answer").get<std::string>();
  if (r.question.empty() || r.human_answer.empty()) {
    throw Error(Errc::MissingField, "record '" + r.id + "' has an empty question or human answer");
  }
  r.generations.clear();
  if (auto it = j.find("generations"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(Errc::Parse, "'generations' must be an object");
    for (const auto& [name, text] : it->items()) {
      if (!text.is_string()) throw Error(Errc::Parse, "generation '" + name + "' is not a string");
      r.generations.emplace(name, text.get<std::string>());
    }
  }
}

DatasetSplit load_jsonl(const std::filesystem::path& path, SplitName name) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  DatasetSplit split{name, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      split.records.push_back(nlohmann::json::parse(line).get<QARecord>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  if (in.bad()) throw Error(Errc::Io, "read failure on " + path.string());
  return split;
}

void save_jsonl(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& r : split.records) out << nlohmann::json(r).dump() << '\n';
  if (!out) throw Error(Errc::Io, "write failure on " + path.string());
}

}  // namespace failopt::corpus
