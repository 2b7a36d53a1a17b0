#pragma once

#include <string>
#include <torch/torch.h>
#include <utility>
#include <vector>

#include "famix/core/types.hpp"
#include "famix/mining/encoder.hpp"

namespace famix {

/// Which parts enter the mining prompt: "<fragment> style <class>", "<fragment> style" or
/// "<class>".
enum class PromptConstruction { kStyleAndClass, kStyleOnly, kClassOnly };
std::string to_string(PromptConstruction c);
PromptConstruction parse_prompt_construction(const std::string& s);

struct PromptSpec {
  std::string style_fragment;
  std::string class_name;
  std::string suffix = "style";
  std::string rendered;
  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

PromptSpec make_prompt(const std::string& fragment, const std::string& class_name,
                       PromptConstruction construction = PromptConstruction::kStyleAndClass);

struct PinOptions {
  int steps = 100;
  double step_size = 1.0;
  /// Rejects a step that raises the loss and halves the step size instead.
  bool halve_on_increase = true;
};

struct PinResult {
  StyleStats style;
  double initial_cosine_distance = 0.0;
  double final_cosine_distance = 0.0;
  int iterations_run = 0;
  PromptSpec prompt;
  /// Accepted loss after each iteration (index 0 = initial loss).
  std::vector<double> loss_trace;
};

/// Cosine distance between embed(PIN(patch; mu, sigma)) and a fixed text embedding, as a
/// function of the style variables.
class PinObjective {
 public:
  PinObjective(JointEncoder& encoder, const FeatureMap& patch, torch::Tensor text_embedding);

  const StyleStats& initial_style() const { return initial_; }
  double loss(const StyleStats& style) const;
  /// Loss and its gradient; the gradient is returned as a StyleStats of d/dmu, d/dsigma.
  std::pair<double, StyleStats> loss_and_gradient(const StyleStats& style) const;

 private:
  torch::Tensor evaluate(const torch::Tensor& mu, const torch::Tensor& sigma) const;

  JointEncoder& encoder_;
  StyleStats initial_;
  torch::Tensor normalized_;  // (patch - mu_f) / sigma_f, 1 x C x h x w
  torch::Tensor text_;
};

/// Fits (mu, sigma) by gradient descent from channel_stats(patch); sigma is clamped to
/// kEpsilonSigma after each step. Throws DomainError for steps < 0 and ConfigError when the
/// visual and text embeddings differ in size.
PinResult pin_optimize(const FeatureMap& patch, const PromptSpec& prompt, JointEncoder& encoder,
                       const PinOptions& options = {});

/// The restylized patch PIN(patch; style) = adain(patch, style).
FeatureMap pin_apply(const FeatureMap& patch, const StyleStats& style);

}  // namespace famix
