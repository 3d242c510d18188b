#include "emocause/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emocause/error.hpp"
#include "emocause/text.hpp"

namespace emocause {

using nlohmann::json;

Relations parse_relations(std::string_view name) {
  if (name == "xReact") return Relations::x_react;
  if (name == "oReact") return Relations::o_react;
  if (name == "both") return Relations::both;
  throw ConfigError("unknown relations '" + std::string(name) + "' (expected xReact, oReact or both)");
}

std::string to_string(Relations relations) {
  switch (relations) {
    case Relations::x_react: return "xReact";
    case Relations::o_react: return "oReact";
    case Relations::both: return "both";
  }
  throw ConfigError("invalid relations value");
}

std::string normalize_headline(std::string_view headline) {
  const auto first = headline.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = headline.find_last_not_of(" \t\r\n");
  std::vector<char32_t> cps = decode_utf8(headline.substr(first, last - first + 1));
  for (char32_t& c : cps) {
    // ASCII and Latin-1 uppercase ranges, as in split_words.
    if ((c >= U'A' && c <= U'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7)) c += 32;
  }
  return encode_utf8(cps);
}

namespace {

KnowledgeResult select(const KnowledgeResult& full, const KnowledgeRequest& request) {
  if (request.top_k == 0) throw ConfigError("top_k must be at least 1");
  KnowledgeResult out;
  auto take = [&](const std::vector<std::string>& from, std::vector<std::string>& to) {
    to.assign(from.begin(), from.begin() + static_cast<std::ptrdiff_t>(std::min(request.top_k, from.size())));
  };
  if (request.relations != Relations::o_react) take(full.x_react, out.x_react);
  if (request.relations != Relations::x_react) take(full.o_react, out.o_react);
  return out;
}

std::vector<std::string> phrase_list(const json& record, const char* field, const std::string& where) {
  if (!record.contains(field)) throw DataError(where + ": missing field '" + field + "'");
  const json& list = record.at(field);
  if (!list.is_array()) throw DataError(where + ": field '" + std::string(field) + "' must be an array");
  std::vector<std::string> out;
  for (const json& p : list) {
    if (!p.is_string() || p.get<std::string>().empty()) {
      throw DataError(where + ": field '" + std::string(field) + "' must hold nonempty strings");
    }
    out.push_back(p.get<std::string>());
  }
  return out;
}

}  // namespace

void FileKnowledgeProvider::insert(const CacheEntry& entry, const std::string& where) {
  const std::string key = normalize_headline(entry.headline);
  if (key.empty()) throw DataError(where + ": empty headline");
  for (const auto* list : {&entry.x_react, &entry.o_react}) {
    for (const auto& p : *list) {
      if (p.empty()) throw DataError(where + ": empty phrase");
    }
  }
  auto [it, inserted] = entries_.insert_or_assign(key, KnowledgeResult{entry.x_react, entry.o_react});
  if (!inserted) warnings_.push_back(where + ": duplicate headline '" + entry.headline + "', keeping the later entry");
}

FileKnowledgeProvider FileKnowledgeProvider::load_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open knowledge cache '" + path + "'");
  FileKnowledgeProvider provider;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object()) throw DataError(where + ": expected a JSON object");
    if (!record.contains("headline") || !record.at("headline").is_string()) {
      throw DataError(where + ": missing field 'headline'");
    }
    provider.insert({record.at("headline").get<std::string>(), phrase_list(record, "xReact", where),
                     phrase_list(record, "oReact", where)},
                    where);
  }
  return provider;
}

FileKnowledgeProvider FileKnowledgeProvider::from_entries(const std::vector<CacheEntry>& entries) {
  FileKnowledgeProvider provider;
  for (std::size_t i = 0; i < entries.size(); ++i) provider.insert(entries[i], "entry " + std::to_string(i));
  return provider;
}

KnowledgeResult FileKnowledgeProvider::provide(const KnowledgeRequest& request) const {
  const auto it = entries_.find(normalize_headline(request.headline));
  if (it == entries_.end()) throw NotFoundError("no cached knowledge for headline '" + request.headline + "'");
  return select(it->second, request);
}

void write_cache(const std::string& path, const std::vector<CacheEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write knowledge cache '" + path + "'");
  for (const auto& e : entries) {
    json record = {{"headline", e.headline}, {"xReact", e.x_react}, {"oReact", e.o_react}};
    out << record.dump() << '\n';
  }
}

LexiconKnowledgeProvider::LexiconKnowledgeProvider(std::map<std::string, Phrases> lexicon)
    : lexicon_(std::move(lexicon)) {}

LexiconKnowledgeProvider LexiconKnowledgeProvider::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open knowledge lexicon '" + path + "'");
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) {
      if (!part.empty()) parts.push_back(part);
    }
    return parts;
  };
  std::map<std::string, Phrases> lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3 || cols[0].empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected keyword<TAB>xReact<TAB>oReact");
    }
    lexicon[normalize_headline(cols[0])] = {split(cols[1], ','), split(cols[2], ',')};
  }
  return LexiconKnowledgeProvider(std::move(lexicon));
}

KnowledgeResult LexiconKnowledgeProvider::provide(const KnowledgeRequest& request) const {
  KnowledgeResult full;
  auto append = [](std::vector<std::string>& to, const std::vector<std::string>& from) {
    for (const auto& p : from) {
      if (std::find(to.begin(), to.end(), p) == to.end()) to.push_back(p);
    }
  };
  for (const Word& w : split_words(request.headline)) {
    const auto it = lexicon_.find(w.text);
    if (it == lexicon_.end()) continue;
    append(full.x_react, it->second.x_react);
    append(full.o_react, it->second.o_react);
  }
  if (full.x_react.empty()) full.x_react = {std::string(kFallback)};
  if (full.o_react.empty()) full.o_react = {std::string(kFallback)};
  return select(full, request);
}

namespace {

std::string join_phrases(const std::vector<std::string>& phrases) {
  std::string out;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i > 0) out += i + 1 == phrases.size() ? " and " : ", ";
    out += phrases[i];
  }
  return out;
}

}  // namespace

std::string render_template(const KnowledgeResult& result, Relations relations) {
  std::string out;
  if (relations != Relations::o_react && !result.x_react.empty()) {
    out += "This person feels " + join_phrases(result.x_react) + ".";
  }
  if (relations != Relations::x_react && !result.o_react.empty()) {
    if (!out.empty()) out += ' ';
    out += "Others feel " + join_phrases(result.o_react) + ".";
  }
  return out;
}

}  // namespace emocause
