// Copyright 2026 The simhammer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Shared vocabulary types: virtual cycles, address kinds, error classes and
// the deterministic random source used wherever a seed is involved.

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace simhammer {

using Cycles = std::uint64_t;

/// Byte address in the simulated physical address space.
struct PhysAddr {
  std::uint64_t value = 0;
  constexpr auto operator<=>(const PhysAddr&) const = default;
};

/// Byte address as seen by attacker/victim code.
struct VirtAddr {
  std::uint64_t value = 0;
  constexpr auto operator<=>(const VirtAddr&) const = default;
};

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Address outside the configured geometry or capacity.
class AddressError : public SimError {
 public:
  using SimError::SimError;
};

/// An operation was invoked in a state or with arguments its contract forbids.
class MisuseError : public SimError {
 public:
  using SimError::SimError;
};

class ConfigError : public SimError {
 public:
  using SimError::SimError;
};

class CalibrationError : public SimError {
 public:
  using SimError::SimError;
};

/// splitmix64-seeded xoshiro256**. The standard distributions are
/// implementation-defined, so bounded draws are done here to keep outputs
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    for (auto& word : state_) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = -bound % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= limit) return x % bound;
    }
  }

  /// Uniform integer in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    if (hi - lo == ~0ULL) return next();
    return lo + below(hi - lo + 1);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4]{};
};

}  // namespace simhammer

template <>
struct std::hash<simhammer::PhysAddr> {
  std::size_t operator()(const simhammer::PhysAddr& a) const noexcept {
    return std::hash<std::uint64_t>{}(a.value);
  }
};
