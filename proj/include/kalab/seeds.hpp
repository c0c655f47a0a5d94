#pragma once

#include <cstdint>

#include "kalab/linalg.hpp"

// Named random streams. Every stochastic input of an experiment is drawn from
// one of these, keyed by the model seed and a purpose label, so that runs are
// reproducible and independent of scheduling. Model initialization depends on
// the seed alone: every target family sees the same initial weights.
namespace kalab::seeds {

inline RngStream model(std::uint64_t seed) { return RngStream::derive(seed, "model-init"); }
inline RngStream train_data(std::uint64_t seed) { return RngStream::derive(seed, "train-data"); }
inline RngStream test_data(std::uint64_t seed) { return RngStream::derive(seed, "test-data"); }
inline RngStream shuffle(std::uint64_t seed) { return RngStream::derive(seed, "shuffle"); }
inline RngStream target(std::uint64_t seed) { return RngStream::derive(seed, "target-params"); }
inline RngStream rotations(std::uint64_t seed, std::uint64_t m) {
  return RngStream::derive(seed, "rotations", {m});
}
inline RngStream second_stage(std::uint64_t seed, std::uint64_t width) {
  return RngStream::derive(seed, "second-stage-init", {width});
}

}  // namespace kalab::seeds
