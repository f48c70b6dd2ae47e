#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ernest/data/dataset.hpp"
#include "ernest/errors.hpp"
#include "ernest/rng.hpp"

namespace ernest::data {

struct SyntheticConfig {
  std::size_t n_subjects = 40;
  std::size_t trials_per_subject = 30;
  std::size_t channels = 16;            // C
  std::size_t samples_per_channel = 64; // J
  std::vector<std::size_t> informative_channels;
  double effect_size = 2.0;             // class amplitude gap, in noise-sigma units
  std::vector<std::pair<std::size_t, std::size_t>> coupled_pairs;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<std::size_t> ground_truth;  // informative plus coupled, sorted
};

inline void validate_synthetic_config(const SyntheticConfig& cfg) {
  if (cfg.n_subjects == 0 || cfg.trials_per_subject == 0) {
    throw ConfigError("synthetic data needs at least one subject and trial");
  }
  if (cfg.channels == 0 || cfg.samples_per_channel == 0) {
    throw ConfigError("synthetic data needs positive channel and sample counts");
  }
  if (!(cfg.noise_sigma > 0.0)) {
    throw ConfigError("noise sigma must be positive");
  }
  if (cfg.effect_size < 0.0) {
    throw ConfigError("effect size must be nonnegative");
  }
  std::set<std::size_t> used;
  for (const std::size_t c : cfg.informative_channels) {
    if (c >= cfg.channels) {
      throw ConfigError("informative channel index out of range");
    }
    if (!used.insert(c).second) {
      throw ConfigError("informative channel listed twice");
    }
  }
  for (const auto& [a, b] : cfg.coupled_pairs) {
    if (a >= cfg.channels || b >= cfg.channels) {
      throw ConfigError("coupled channel index out of range");
    }
    if (a == b) throw ConfigError("coupled pair uses one channel twice");
    if (!used.insert(a).second || !used.insert(b).second) {
      throw ConfigError("coupled channels overlap informative channels or "
                        "another pair");
    }
  }
}

// Gaussian-noise trials with planted signal. Independent informative
// channels carry a class-1-only 10-cycle sinusoid with a random phase
// per trial and an amplitude drawn uniformly from [0, effect_size*sigma]
// per trial, so individual trials range from obvious to ambiguous. The
// two channels of a coupled pair ride one 10-cycle tone with a shared
// random phase and a shared random envelope; class 1 tilts the two
// amplitudes apart multiplicatively (one up, one down). The envelope
// swamps the tilt, so either channel alone is near chance level, but
// the amplitude difference cancels the envelope and carries the class:
// the pair is informative only jointly. Every trial consumes the same
// number of RNG draws regardless of class, keeping per-subject streams
// aligned.
inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  validate_synthetic_config(cfg);
  const double sigma = cfg.noise_sigma;
  const double gap = cfg.effect_size * sigma;
  const double pair_tilt = 0.15 * cfg.effect_size;
  const double pair_mask = 2.0 * sigma * std::max(cfg.effect_size, 1.0);
  constexpr double kTwoPi = 6.283185307179586476925286766559;

  std::set<std::size_t> informative(cfg.informative_channels.begin(),
                                    cfg.informative_channels.end());
  std::set<std::size_t> special = informative;
  for (const auto& [a, b] : cfg.coupled_pairs) {
    special.insert(a);
    special.insert(b);
  }

  std::size_t name_width = 2;
  for (std::size_t c = cfg.channels - 1; c >= 100; c /= 10) ++name_width;

  SyntheticDataset out;
  out.dataset.samples_per_channel = cfg.samples_per_channel;
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    std::string digits = std::to_string(c);
    out.dataset.channel_names.push_back(
        "ch" + std::string(name_width - digits.size(), '0') + digits);
  }
  out.ground_truth.assign(special.begin(), special.end());

  const std::size_t j_count = cfg.samples_per_channel;
  std::vector<double> amplitude(cfg.channels);
  std::vector<double> phase(cfg.channels);
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    const std::size_t label = s % 2;
    std::string digits = std::to_string(s);
    const std::string subject_id =
        "sub" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') +
        digits;
    RngStream rng(cfg.seed, RngRole::Synth, s);
    for (std::size_t t = 0; t < cfg.trials_per_subject; ++t) {
      std::fill(amplitude.begin(), amplitude.end(), 0.0);
      for (const auto& [a, b] : cfg.coupled_pairs) {
        const double envelope = pair_mask * rng.uniform();
        const double psi = kTwoPi * rng.uniform();
        const double tilt = label == 1 ? pair_tilt : 0.0;
        amplitude[a] = envelope * (1.0 + tilt);
        amplitude[b] = envelope * (1.0 - tilt);
        phase[a] = psi;
        phase[b] = psi;
      }
      for (const std::size_t c : informative) {
        const double strength = rng.uniform();
        amplitude[c] = label == 1 ? gap * strength : 0.0;
        phase[c] = kTwoPi * rng.uniform();
      }
      RawTrial trial;
      trial.subject_id = subject_id;
      trial.class_label = label;
      trial.trial_index = t;
      trial.stimulus = Stimulus::S1_obj;
      trial.channel_names = out.dataset.channel_names;
      trial.samples.reserve(cfg.channels * j_count);
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t j = 0; j < j_count; ++j) {
          const double angle = kTwoPi * 10.0 * static_cast<double>(j) /
                               static_cast<double>(j_count);
          double v = sigma * rng.normal();
          if (amplitude[c] != 0.0) {
            v += amplitude[c] * std::sin(angle + phase[c]);
          }
          trial.samples.push_back(static_cast<float>(v));
        }
      }
      out.dataset.trials.push_back(std::move(trial));
    }
  }
  return out;
}

}  // namespace ernest::data
