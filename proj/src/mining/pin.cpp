#include "famix/mining/pin.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "famix/core/style_ops.hpp"
#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

std::string to_string(PromptConstruction c) {
  switch (c) {
    case PromptConstruction::kStyleAndClass: return "style+class";
    case PromptConstruction::kStyleOnly: return "style";
    case PromptConstruction::kClassOnly: return "class";
  }
  return "style+class";
}

PromptConstruction parse_prompt_construction(const std::string& s) {
  if (s == "style+class") return PromptConstruction::kStyleAndClass;
  if (s == "style") return PromptConstruction::kStyleOnly;
  if (s == "class") return PromptConstruction::kClassOnly;
  throw ConfigError(fmt::format("unknown prompt construction '{}' (expected style+class, style or class)", s));
}

PromptSpec make_prompt(const std::string& fragment, const std::string& class_name,
                       PromptConstruction construction) {
  PromptSpec p;
  p.style_fragment = fragment;
  p.class_name = class_name;
  switch (construction) {
    case PromptConstruction::kStyleAndClass:
      p.rendered = fragment + " " + p.suffix + " " + class_name;
      break;
    case PromptConstruction::kStyleOnly:
      p.rendered = fragment + " " + p.suffix;
      break;
    case PromptConstruction::kClassOnly:
      p.rendered = class_name;
      break;
  }
  if (p.rendered.find_first_not_of(' ') == std::string::npos) {
    throw InvalidInputError("prompt renders to an empty string");
  }
  return p;
}

PinObjective::PinObjective(JointEncoder& encoder, const FeatureMap& patch, torch::Tensor text_embedding)
    : encoder_(encoder), initial_(channel_stats(patch)), text_(std::move(text_embedding)) {
  if (patch.channels() != encoder.layer1_channels()) {
    throw ShapeError(fmt::format("patch has {} channels, encoder Layer1 has {}", patch.channels(),
                                 encoder.layer1_channels()));
  }
  const int c = patch.channels();
  auto x = feature_map_to_tensor(patch).unsqueeze(0);
  auto mu = torch::tensor(initial_.mu, torch::kFloat64).view({1, c, 1, 1});
  auto sd = torch::tensor(initial_.sigma, torch::kFloat64).view({1, c, 1, 1});
  normalized_ = (x - mu) / sd;
  text_ = text_.to(torch::kFloat64).detach();
}

torch::Tensor PinObjective::evaluate(const torch::Tensor& mu, const torch::Tensor& sigma) const {
  const int64_t c = mu.size(0);
  auto styled = sigma.view({1, c, 1, 1}) * normalized_ + mu.view({1, c, 1, 1});
  auto v = encoder_.embed_from_layer1(styled)[0];
  if (v.size(0) != text_.size(0)) {
    throw ConfigError(fmt::format("visual embedding has {} dims, text embedding {}", v.size(0), text_.size(0)));
  }
  auto cosine = torch::dot(v, text_) / (v.norm() * text_.norm());
  return 1.0 - cosine;
}

double PinObjective::loss(const StyleStats& style) const {
  torch::NoGradGuard no_grad;
  return evaluate(torch::tensor(style.mu, torch::kFloat64), torch::tensor(style.sigma, torch::kFloat64))
      .item<double>();
}

std::pair<double, StyleStats> PinObjective::loss_and_gradient(const StyleStats& style) const {
  auto mu = torch::tensor(style.mu, torch::kFloat64).requires_grad_(true);
  auto sigma = torch::tensor(style.sigma, torch::kFloat64).requires_grad_(true);
  auto l = evaluate(mu, sigma);
  l.backward();
  return {l.item<double>(), tensor_to_style(mu.grad(), sigma.grad())};
}

PinResult pin_optimize(const FeatureMap& patch, const PromptSpec& prompt, JointEncoder& encoder,
                       const PinOptions& options) {
  if (options.steps < 0) throw DomainError(fmt::format("PIN steps must be >= 0, got {}", options.steps));
  if (!(options.step_size > 0.0)) throw DomainError("PIN step size must be positive");
  torch::Tensor text;
  {
    torch::NoGradGuard no_grad;
    text = encoder.embed_text(prompt.rendered);
  }
  PinObjective objective(encoder, patch, text);

  PinResult result;
  result.prompt = prompt;
  StyleStats style = objective.initial_style();
  auto [loss, grad] = objective.loss_and_gradient(style);
  result.initial_cosine_distance = loss;
  result.loss_trace.push_back(loss);

  double eta = options.step_size;
  for (int it = 0; it < options.steps; ++it) {
    StyleStats next = style;
    for (std::size_t k = 0; k < next.mu.size(); ++k) {
      next.mu[k] -= eta * grad.mu[k];
      next.sigma[k] = std::max(next.sigma[k] - eta * grad.sigma[k], kEpsilonSigma);
    }
    auto [next_loss, next_grad] = objective.loss_and_gradient(next);
    ++result.iterations_run;
    if (options.halve_on_increase && !(next_loss <= loss)) {
      eta *= 0.5;
      result.loss_trace.push_back(loss);
      continue;
    }
    style = std::move(next);
    loss = next_loss;
    grad = std::move(next_grad);
    result.loss_trace.push_back(loss);
  }
  result.style = std::move(style);
  result.final_cosine_distance = loss;
  return result;
}

FeatureMap pin_apply(const FeatureMap& patch, const StyleStats& style) { return adain(patch, style); }

}  // namespace famix
