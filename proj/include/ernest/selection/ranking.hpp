#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/io_util.hpp"

namespace ernest::selection {

struct RankingEntry {
  std::size_t channel_index = 0;
  double score = 0.0;
};

// Channels ordered by score descending, ties by ascending channel index.
struct ChannelRanking {
  std::vector<RankingEntry> entries;
  std::string metric;
};

inline ChannelRanking make_ranking(const std::vector<double>& scores,
                                   std::string metric) {
  ChannelRanking ranking;
  ranking.metric = std::move(metric);
  ranking.entries.reserve(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) {
    ranking.entries.push_back({c, scores[c]});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankingEntry& a, const RankingEntry& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.channel_index < b.channel_index;
                   });
  return ranking;
}

// Reads back any "rank,channel_index,channel_name,<metric>[,...]" CSV
// produced by the ranking writers.
inline ChannelRanking ranking_from_csv(std::string_view csv) {
  ChannelRanking ranking;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto fields = split_line(line, ',');
    if (!header_seen) {
      if (fields.size() < 4 || fields[0] != "rank" ||
          fields[1] != "channel_index") {
        throw CacheError("unrecognized ranking CSV header");
      }
      ranking.metric = fields[3];
      header_seen = true;
      continue;
    }
    if (fields.size() < 4) throw CacheError("short ranking CSV row");
    RankingEntry entry;
    entry.channel_index =
        static_cast<std::size_t>(parse_double(fields[1]));
    entry.score = parse_double(fields[3]);
    ranking.entries.push_back(entry);
  }
  if (!header_seen) throw CacheError("empty ranking CSV");
  return ranking;
}

// First K ranked channels, preserving rank order.
inline std::vector<std::size_t> select_top_k(const ChannelRanking& ranking,
                                             std::size_t k) {
  if (k == 0 || k > ranking.entries.size()) {
    throw ConfigError("selection size " + std::to_string(k) +
                      " outside [1, " + std::to_string(ranking.entries.size()) +
                      "]");
  }
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back(ranking.entries[i].channel_index);
  }
  return out;
}

}  // namespace ernest::selection
