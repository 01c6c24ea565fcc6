#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "moelab/theory/length2.hpp"
#include "moelab/theory/memorizer.hpp"

namespace moelab::theory {

// Symmetric uniform quantizer over [-max|x|, max|x|] with 2^(bits-1) - 1
// positive levels.
std::vector<double> quantize_tensor(std::span<const double> values, int bits);
void quantize_in_place(Eigen::Ref<Eigen::MatrixXd> values, int bits);

// Weights quantized per tensor; attention weights and activations are also
// carried in fixed point with `bits` fractional bits.
ExplicitTransformer quantize_params(const ExplicitTransformer& tf, int bits);
MemorizerMoE quantize_params(const MemorizerMoE& model, int bits);

}  // namespace moelab::theory
