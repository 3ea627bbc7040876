#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <tuple>

#include "papyrid/errors.hpp"
#include "papyrid/numerics.hpp"

namespace papyrid {

namespace {

constexpr Eigen::Index kChunk = 2048;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct ChunkResult {
  RowMatrix sums;
  std::vector<Eigen::Index> counts;
  double inertia = 0;
};

// Assigns rows [begin, end) and accumulates per-centre sums.
void assign_chunk(const RowMatrix& data, const RowMatrix& centers, Eigen::Index begin,
                  Eigen::Index end, std::vector<Eigen::Index>& labels, std::vector<double>& dist,
                  ChunkResult& out) {
  const Eigen::Index k = centers.rows();
  out.sums = RowMatrix::Zero(k, data.cols());
  out.counts.assign(static_cast<std::size_t>(k), 0);
  out.inertia = 0;
  for (Eigen::Index i = begin; i < end; ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = (data.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist[static_cast<std::size_t>(i)] = best_d;
    out.sums.row(best) += data.row(i);
    ++out.counts[static_cast<std::size_t>(best)];
    out.inertia += best_d;
  }
}

RowMatrix kmeans_pp(const RowMatrix& data, std::size_t k, std::mt19937_64& rng) {
  const Eigen::Index n = data.rows();
  RowMatrix centers(static_cast<Eigen::Index>(k), data.cols());
  Eigen::Index first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  centers.row(0) = data.row(first);
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (data.row(i) - centers.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (double v : d2) total += v;
    Eigen::Index pick = n - 1;
    if (total > 0) {
      const double target = uniform01(rng) * total;
      double acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    }
    centers.row(static_cast<Eigen::Index>(c)) = data.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (data.row(i) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centers;
}

}  // namespace

std::size_t Codebook::nearest(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

Codebook kmeans(const RowMatrix& data, const KMeansParams& params) {
  const Eigen::Index n = data.rows();
  if (params.k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (static_cast<std::size_t>(n) < params.k) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " points for k=" + std::to_string(params.k));
  }
  if (!data.allFinite()) throw Error(ErrorCode::NonFiniteInput, "k-means input has NaN/Inf");

  std::mt19937_64 rng(params.seed);
  Codebook cb;
  cb.seed = params.seed;
  cb.centers = kmeans_pp(data, params.k, rng);

  const Eigen::Index k = static_cast<Eigen::Index>(params.k);
  const Eigen::Index chunks = (n + kChunk - 1) / kChunk;
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<ChunkResult> partial(static_cast<std::size_t>(chunks));
  const int jobs = std::max(1, params.jobs);

  auto assign_all = [&]() {
    auto worker = [&](int tid) {
      for (Eigen::Index c = tid; c < chunks; c += jobs) {
        assign_chunk(data, cb.centers, c * kChunk, std::min(n, (c + 1) * kChunk), labels, dist,
                     partial[static_cast<std::size_t>(c)]);
      }
    };
    if (jobs == 1 || chunks == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < jobs; ++t) pool.emplace_back(worker, t);
      for (auto& t : pool) t.join();
    }
    // merge in chunk order for a thread-count independent result
    RowMatrix sums = RowMatrix::Zero(k, data.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    double inertia = 0;
    for (const auto& p : partial) {
      sums += p.sums;
      for (Eigen::Index c = 0; c < k; ++c) counts[c] += p.counts[c];
      inertia += p.inertia;
    }
    return std::make_tuple(std::move(sums), std::move(counts), inertia);
  };

  double previous = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int it = 0; it < params.max_iters; ++it) {
    auto [sums, counts, inertia] = assign_all();
    cb.inertia_history.push_back(inertia);
    cb.inertia = inertia;
    if (std::isfinite(previous) && previous - inertia <= params.tol * previous) {
      converged = true;
      break;
    }
    previous = inertia;

    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        cb.centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      } else {
        // reseed on the point worst served by its current centre
        const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
        cb.centers.row(c) = data.row(far);
        dist[static_cast<std::size_t>(far)] = 0;
      }
    }
  }
  if (!converged) {
    // inertia of the final centres
    cb.inertia = std::get<2>(assign_all());
    cb.inertia_history.push_back(cb.inertia);
  }
  return cb;
}

}  // namespace papyrid
