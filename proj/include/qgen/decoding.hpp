// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qgen/gateway.hpp"

namespace qgen::decoding {

/// Next-token distribution over a candidate set. `logprobs` are normalized
/// (log-softmax). The empty token denotes end of text.
struct StepDistribution {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
};

/// Autoregressive model seen by the decoders: given the tokens generated so
/// far (the prompt is bound into the model), return the next-step
/// distribution.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual StepDistribution next(std::span<const std::string> generated) const = 0;
};

/// Runs greedy, nucleus or beam decoding per params.mode. Honors stop
/// sequences and max_new_tokens. params.seed only matters for sampling.
Completion decode(const StepModel& model, const DecodingParams& params);

/// Indices kept by nucleus filtering of a probability vector: sorted by
/// descending probability (ties by index), cut to top_k, then to the
/// smallest prefix whose mass reaches top_p.
std::vector<std::size_t> nucleus_support(std::span<const double> probs, double top_p,
                                         int top_k);

}  // namespace qgen::decoding
