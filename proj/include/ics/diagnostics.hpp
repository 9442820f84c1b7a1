#pragma once

#include <span>
#include <vector>

namespace ics {

/// Draws of one scalar quantity, one vector per chain.
using ChainDraws = std::vector<std::vector<double>>;

/// Inverse of the empirical CDF: the smallest draw x with F_n(x) >= p
/// (order statistic ceil(n p), first one for p = 0).
double empirical_quantile(std::span<const double> sorted, double p);

/// Split-chain potential scale reduction: each chain is halved and the
/// halves are compared as separate chains, so one chain still gives a
/// value. NaN when every draw is identical.
double split_rhat(const ChainDraws& chains);

/// Multi-chain effective sample size from split chains: combined
/// autocorrelation estimates truncated by Geyer's initial monotone sequence.
/// NaN when every draw is identical.
double effective_sample_size(const ChainDraws& chains);

/// Lag 1..max_lag autocorrelation, averaged over chains.
std::vector<double> autocorrelation(const ChainDraws& chains, int max_lag);

/// Monte Carlo standard error of the median for a roughly normal posterior.
double mcse_median(double posterior_sd, double ess);

}  // namespace ics
