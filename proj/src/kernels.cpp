#include "smclimits/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smclimits/error.hpp"
#include "smclimits/numeric.hpp"

namespace smclimits {

double MutationKernelPair::weight(PointView from, PointView to) const {
  return std::exp(log_weight(from, to));
}

std::size_t MultiProposal::dim_increment() const {
  return proposals.empty() ? 0 : proposals.front().dim_increment;
}

std::vector<SupportAtom> average_support(std::span<const MutationKernelPair> proposals, PointView from) {
  std::vector<SupportAtom> merged;
  const double inv_alpha = 1.0 / static_cast<double>(proposals.size());
  for (const auto& pair : proposals) {
    if (!pair.enumerable()) {
      throw Error(ErrorCode::kInvalidArgument, "average kernel requires enumerable proposals");
    }
    for (auto& atom : pair.support(from)) {
      auto it = std::find_if(merged.begin(), merged.end(),
                             [&](const SupportAtom& a) { return a.point == atom.point; });
      if (it == merged.end()) {
        merged.push_back({std::move(atom.point), atom.probability * inv_alpha});
      } else {
        it->probability += atom.probability * inv_alpha;
      }
    }
  }
  return merged;
}

std::vector<SupportAtom> average_support(const MultiProposal& multi, PointView from) {
  return average_support(multi.proposals, from);
}

MultiProposal MultiProposal::from_target_mass(std::vector<MutationKernelPair> proposals, KernelMassFn target_mass) {
  if (proposals.empty()) {
    throw Error(ErrorCode::kInvalidOffspringCount, "invalid offspring count");
  }
  const std::size_t inc = proposals.front().dim_increment;
  for (const auto& p : proposals) {
    if (p.dim_increment != inc || !p.enumerable()) {
      throw Error(ErrorCode::kInvalidArgument, "multi-proposal members must be enumerable with equal output dimension");
    }
  }
  MultiProposal multi;
  multi.proposals = std::move(proposals);
  // The weight closure needs the average kernel; it holds its own copy of the members.
  auto members = multi.proposals;
  multi.log_weight = [members = std::move(members), target_mass = std::move(target_mass)](PointView from,
                                                                                          PointView to) {
    double rbar = 0.0;
    for (const auto& atom : average_support(members, from)) {
      if (std::equal(atom.point.begin(), atom.point.end(), to.begin(), to.end())) {
        rbar = atom.probability;
        break;
      }
    }
    const double mass = target_mass(from, to);
    if (mass < 0.0 || !std::isfinite(mass)) {
      throw Error(ErrorCode::kInvalidDensity, "invalid density");
    }
    if (rbar <= 0.0) {
      if (mass > 0.0) {
        throw Error(ErrorCode::kInvalidWeight, "invalid weight");
      }
      return -std::numeric_limits<double>::infinity();
    }
    return std::log(mass / rbar);
  };
  return multi;
}

MutationKernelPair reweighting_pair(std::function<double(PointView)> density_ratio) {
  MutationKernelPair pair;
  pair.dim_increment = 0;
  pair.dirac = true;
  pair.propose = [](Rng&, PointView from, std::span<double> out) { std::copy(from.begin(), from.end(), out.begin()); };
  pair.log_weight = [ratio = std::move(density_ratio)](PointView, PointView to) {
    const double r = ratio(to);
    if (!(r >= 0.0)) {
      throw Error(ErrorCode::kInvalidDensity, "invalid density");
    }
    return std::log(r);
  };
  pair.support = [](PointView from) {
    return std::vector<SupportAtom>{{Point(from.begin(), from.end()), 1.0}};
  };
  return pair;
}

bool is_reweighting_as_mutation(const MutationKernelPair& pair) {
  return pair.dirac && pair.dim_increment == 0;
}

DiscreteDistribution::DiscreteDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "distribution needs at least one atom");
  }
  std::vector<double> probs;
  probs.reserve(atoms_.size());
  for (const auto& a : atoms_) {
    if (!(a.probability >= 0.0) || !std::isfinite(a.value)) {
      throw Error(ErrorCode::kInvalidArgument, "invalid atom");
    }
    probs.push_back(a.probability);
  }
  cumulative_ = cumulative_sums(probs);
  if (std::abs(cumulative_.back() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "probabilities must sum to one");
  }
}

double DiscreteDistribution::expectation(const std::function<double(double)>& f) const {
  CompensatedSum acc;
  for (const auto& a : atoms_) {
    acc.add(a.probability * f(a.value));
  }
  return acc.value();
}

double DiscreteDistribution::sample(Rng& rng) const {
  return atoms_[inverse_cdf_index(cumulative_, uniform01(rng) * cumulative_.back())].value;
}

}  // namespace smclimits
