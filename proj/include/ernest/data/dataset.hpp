#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/io_util.hpp"
#include "ernest/rng.hpp"

namespace ernest::data {

enum class Stimulus {
  S1_obj,
  S2_match,
  S2_nomatch,
};

inline std::string stimulus_name(Stimulus s) {
  switch (s) {
    case Stimulus::S1_obj: return "S1_obj";
    case Stimulus::S2_match: return "S2_match";
    case Stimulus::S2_nomatch: return "S2_nomatch";
  }
  return "unknown";
}

inline Stimulus stimulus_from_name(std::string_view name) {
  if (name == "S1_obj") return Stimulus::S1_obj;
  if (name == "S2_match") return Stimulus::S2_match;
  if (name == "S2_nomatch") return Stimulus::S2_nomatch;
  throw ConfigError("unknown stimulus '" + std::string(name) + "'");
}

// One fixed-length multi-channel recording. Samples are row-major
// (channel-major) C x J, stored as f32 so the on-disk cache round-trips
// bit-for-bit.
struct RawTrial {
  std::string subject_id;
  std::size_t class_label = 0;  // 0 control, 1 alcoholic
  std::size_t trial_index = 0;
  Stimulus stimulus = Stimulus::S1_obj;
  std::vector<std::string> channel_names;
  std::vector<float> samples;

  std::size_t channel_count() const { return channel_names.size(); }

  std::size_t samples_per_channel() const {
    return channel_names.empty() ? 0 : samples.size() / channel_names.size();
  }

  const float* channel(std::size_t c) const {
    return samples.data() + c * samples_per_channel();
  }
};

struct Dataset {
  std::vector<std::string> channel_names;  // shared registry, defines c
  std::size_t samples_per_channel = 0;     // J
  std::vector<RawTrial> trials;

  std::size_t channel_count() const { return channel_names.size(); }

  // Unique subject ids in first-appearance order.
  std::vector<std::string> subject_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& t : trials) {
      if (seen.insert(t.subject_id).second) out.push_back(t.subject_id);
    }
    return out;
  }

  // Per-subject class label; conflicting labels within a subject are a
  // data error.
  std::map<std::string, std::size_t> subject_labels() const {
    std::map<std::string, std::size_t> out;
    for (const auto& t : trials) {
      auto [it, inserted] = out.emplace(t.subject_id, t.class_label);
      if (!inserted && it->second != t.class_label) {
        throw LabelError("subject " + t.subject_id +
                         " has trials with conflicting labels");
      }
    }
    return out;
  }
};

struct SubjectSplit {
  std::vector<std::string> train_subject_ids;
  std::vector<std::string> test_subject_ids;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::size_t parse_index(std::string_view s, const char* what) {
  std::size_t v = 0;
  if (s.empty()) throw ParseError(ParseError::Kind::Header,
                                  std::string("empty ") + what);
  for (char ch : s) {
    if (ch < '0' || ch > '9') {
      throw ParseError(ParseError::Kind::Header,
                       std::string("malformed ") + what + " '" +
                           std::string(s) + "'");
    }
    v = v * 10 + static_cast<std::size_t>(ch - '0');
  }
  return v;
}

}  // namespace detail

// Parses one trial in the public EEG export format: '#' comment lines
// (the first names the source file, one names the stimulus condition and
// trial number), then 4-field data lines
// "trial_number channel_name sample_index voltage".
inline RawTrial parse_uci_trial_file(std::string_view text) {
  RawTrial trial;
  bool have_subject = false;
  bool have_condition = false;
  bool have_trial_number = false;

  std::vector<std::vector<float>> channel_samples;
  std::vector<std::vector<bool>> channel_seen;
  std::map<std::string, std::size_t, std::less<>> channel_index;
  std::size_t max_sample_index = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    if (line[0] == '#') {
      std::string_view body = line.substr(1);
      if (!have_subject) {
        const auto fields = detail::split_fields(body);
        if (fields.empty()) {
          throw ParseError(ParseError::Kind::Header,
                           "first header line names no subject file");
        }
        std::string_view token = fields[0];
        trial.subject_id = std::string(token.substr(0, token.find('.')));
        if (trial.subject_id.size() < 4) {
          throw ParseError(ParseError::Kind::Label,
                           "subject id '" + trial.subject_id + "' too short");
        }
        const char cls = trial.subject_id[3];
        if (cls == 'a') {
          trial.class_label = 1;
        } else if (cls == 'c') {
          trial.class_label = 0;
        } else {
          throw ParseError(ParseError::Kind::Label,
                           "subject id '" + trial.subject_id +
                               "' encodes no known class");
        }
        have_subject = true;
      }
      if (!have_condition) {
        if (body.find("S2 nomatch") != std::string_view::npos) {
          trial.stimulus = Stimulus::S2_nomatch;
          have_condition = true;
        } else if (body.find("S2 match") != std::string_view::npos) {
          trial.stimulus = Stimulus::S2_match;
          have_condition = true;
        } else if (body.find("S1 obj") != std::string_view::npos) {
          trial.stimulus = Stimulus::S1_obj;
          have_condition = true;
        }
        if (have_condition) {
          const std::size_t at = body.find("trial");
          if (at != std::string_view::npos) {
            const auto fields = detail::split_fields(body.substr(at + 5));
            if (fields.empty()) {
              throw ParseError(ParseError::Kind::Header,
                               "condition header names no trial number");
            }
            trial.trial_index = detail::parse_index(fields[0], "trial number");
            have_trial_number = true;
          }
        }
      }
      continue;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != 4) {
      throw ParseError(ParseError::Kind::Header,
                       "data line has " + std::to_string(fields.size()) +
                           " fields, expected 4");
    }
    const std::size_t line_trial = detail::parse_index(fields[0], "trial number");
    if (!have_trial_number) {
      trial.trial_index = line_trial;
      have_trial_number = true;
    } else if (line_trial != trial.trial_index) {
      throw ParseError(ParseError::Kind::Header,
                       "inconsistent trial number " + std::to_string(line_trial));
    }
    const std::size_t sample = detail::parse_index(fields[2], "sample index");
    double voltage = 0.0;
    try {
      voltage = parse_double(fields[3]);
    } catch (const DataError&) {
      throw ParseError(ParseError::Kind::Header,
                       "malformed voltage '" + std::string(fields[3]) + "'");
    }
    if (!std::isfinite(voltage)) {
      throw ParseError(ParseError::Kind::Header,
                       "non-finite voltage in channel " + std::string(fields[1]));
    }
    auto it = channel_index.find(fields[1]);
    if (it == channel_index.end()) {
      it = channel_index.emplace(std::string(fields[1]),
                                 trial.channel_names.size()).first;
      trial.channel_names.emplace_back(fields[1]);
      channel_samples.emplace_back();
      channel_seen.emplace_back();
    }
    const std::size_t c = it->second;
    if (sample >= channel_seen[c].size()) {
      channel_seen[c].resize(sample + 1, false);
      channel_samples[c].resize(sample + 1, 0.0f);
    }
    if (channel_seen[c][sample]) {
      throw ParseError(ParseError::Kind::Duplicate,
                       "duplicate sample " + std::to_string(sample) +
                           " for channel " + trial.channel_names[c]);
    }
    channel_seen[c][sample] = true;
    channel_samples[c][sample] = static_cast<float>(voltage);
    max_sample_index = std::max(max_sample_index, sample);
    if (eol >= text.size()) break;
  }

  if (!have_subject) {
    throw ParseError(ParseError::Kind::Header, "no header lines found");
  }
  if (!have_condition) {
    throw ParseError(ParseError::Kind::Header,
                     "no header names a stimulus condition");
  }
  if (trial.channel_names.empty()) {
    throw ParseError(ParseError::Kind::Incomplete, "file contains no samples");
  }
  // blocks are emitted in name order so data-line order never matters
  const std::size_t j = max_sample_index + 1;
  trial.samples.reserve(trial.channel_names.size() * j);
  std::vector<std::string> ordered_names;
  ordered_names.reserve(channel_index.size());
  for (const auto& [name, c] : channel_index) {
    if (channel_seen[c].size() < j) {
      channel_seen[c].resize(j, false);
      channel_samples[c].resize(j, 0.0f);
    }
    for (std::size_t s = 0; s < j; ++s) {
      if (!channel_seen[c][s]) {
        throw ParseError(ParseError::Kind::Incomplete,
                         "channel " + name + " is missing sample " +
                             std::to_string(s));
      }
    }
    trial.samples.insert(trial.samples.end(), channel_samples[c].begin(),
                         channel_samples[c].end());
    ordered_names.push_back(name);
  }
  trial.channel_names = std::move(ordered_names);
  return trial;
}

namespace detail {

// Drops blacklisted channels, keeping the remaining order.
inline void apply_blacklist(RawTrial& trial,
                            const std::set<std::string>& blacklist) {
  if (blacklist.empty()) return;
  const std::size_t j = trial.samples_per_channel();
  std::vector<std::string> kept_names;
  std::vector<float> kept_samples;
  for (std::size_t c = 0; c < trial.channel_names.size(); ++c) {
    if (blacklist.count(trial.channel_names[c])) continue;
    kept_names.push_back(trial.channel_names[c]);
    kept_samples.insert(kept_samples.end(), trial.channel(c),
                        trial.channel(c) + j);
  }
  trial.channel_names = std::move(kept_names);
  trial.samples = std::move(kept_samples);
}

// Reorders a trial's channels to the registry order; name sets must match.
inline void conform_to_registry(RawTrial& trial,
                                const std::vector<std::string>& registry) {
  if (trial.channel_names == registry) return;
  const std::size_t j = trial.samples_per_channel();
  std::map<std::string, std::size_t> where;
  for (std::size_t c = 0; c < trial.channel_names.size(); ++c) {
    where.emplace(trial.channel_names[c], c);
  }
  if (where.size() != registry.size()) {
    throw SchemaError("trial channel set does not match the registry");
  }
  std::vector<float> reordered;
  reordered.reserve(trial.samples.size());
  for (const auto& name : registry) {
    const auto it = where.find(name);
    if (it == where.end()) {
      throw SchemaError("trial is missing registry channel " + name);
    }
    reordered.insert(reordered.end(), trial.channel(it->second),
                     trial.channel(it->second) + j);
  }
  trial.channel_names = registry;
  trial.samples = std::move(reordered);
}

}  // namespace detail

// Assembles trials into a Dataset: optional stimulus filter, blacklist
// removal, then canonicalization to the first trial's channel order.
inline Dataset assemble_dataset(std::vector<RawTrial> trials,
                                const std::vector<std::string>& blacklist = {},
                                const Stimulus* condition_filter = nullptr) {
  const std::set<std::string> drop(blacklist.begin(), blacklist.end());
  Dataset ds;
  for (auto& trial : trials) {
    if (condition_filter && trial.stimulus != *condition_filter) continue;
    detail::apply_blacklist(trial, drop);
    if (ds.trials.empty()) {
      ds.channel_names = trial.channel_names;
      ds.samples_per_channel = trial.samples_per_channel();
      if (ds.channel_names.empty()) {
        throw SchemaError("first trial has no channels after the blacklist");
      }
    } else {
      if (trial.samples_per_channel() != ds.samples_per_channel) {
        throw SchemaError("trial of subject " + trial.subject_id + " has " +
                          std::to_string(trial.samples_per_channel()) +
                          " samples per channel, expected " +
                          std::to_string(ds.samples_per_channel));
      }
      detail::conform_to_registry(trial, ds.channel_names);
    }
    ds.trials.push_back(std::move(trial));
  }
  if (ds.trials.empty()) {
    throw EmptyDatasetError("no trials remain after filtering");
  }
  return ds;
}

// Loads every regular file under `root` (recursively, dotfiles skipped,
// lexicographic path order) as one trial each.
inline Dataset load_dataset(const std::filesystem::path& root,
                            const std::vector<std::string>& blacklist = {},
                            const Stimulus* condition_filter = nullptr) {
  if (!std::filesystem::is_directory(root)) {
    throw DataError("not a directory: " + root.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename().string().starts_with('.')) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyDatasetError("no files under " + root.string());
  std::vector<RawTrial> trials;
  trials.reserve(files.size());
  for (const auto& file : files) {
    try {
      trials.push_back(parse_uci_trial_file(read_file(file)));
    } catch (const ParseError& e) {
      throw ParseError(e.kind(), file.string() + ": " + e.what());
    }
  }
  return assemble_dataset(std::move(trials), blacklist, condition_filter);
}

// Class-balanced subject-level split: exactly n_test_subjects/2 test
// subjects per class, sampled from the sorted per-class subject lists.
inline SubjectSplit split_subjects(const Dataset& ds,
                                   std::size_t n_test_subjects,
                                   std::uint64_t seed) {
  const auto labels = ds.subject_labels();
  std::vector<std::string> class0, class1;
  for (const auto& [id, label] : labels) {
    (label == 0 ? class0 : class1).push_back(id);
  }
  SubjectSplit split;
  if (n_test_subjects == 0) {
    for (const auto& [id, label] : labels) split.train_subject_ids.push_back(id);
    return split;
  }
  if (n_test_subjects % 2 != 0) {
    throw SplitError("test subject count must be even for class balance");
  }
  const std::size_t per_class = n_test_subjects / 2;
  if (class0.size() < per_class || class1.size() < per_class) {
    throw SplitError("not enough subjects of each class for " +
                     std::to_string(per_class) + " test subjects per class");
  }
  RngStream rng(seed, RngRole::Split, 0);
  std::set<std::string> test_ids;
  for (const auto* cls : {&class0, &class1}) {
    for (const std::size_t i :
         rng.sample_without_replacement(cls->size(), per_class)) {
      test_ids.insert((*cls)[i]);
    }
  }
  for (const auto& [id, label] : labels) {
    (test_ids.count(id) ? split.test_subject_ids : split.train_subject_ids)
        .push_back(id);
  }
  return split;
}

inline Dataset subset_by_subjects(const Dataset& ds,
                                  const std::vector<std::string>& subject_ids) {
  const std::set<std::string> keep(subject_ids.begin(), subject_ids.end());
  Dataset out;
  out.channel_names = ds.channel_names;
  out.samples_per_channel = ds.samples_per_channel;
  for (const auto& trial : ds.trials) {
    if (keep.count(trial.subject_id)) out.trials.push_back(trial);
  }
  return out;
}

inline std::pair<Dataset, Dataset> split_by_subject(const Dataset& ds,
                                                    std::size_t n_test_subjects,
                                                    std::uint64_t seed) {
  const SubjectSplit split = split_subjects(ds, n_test_subjects, seed);
  return {subset_by_subjects(ds, split.train_subject_ids),
          subset_by_subjects(ds, split.test_subject_ids)};
}

}  // namespace ernest::data
