#include "mtfb/channel.hpp"

#include "mtfb/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace mtfb {

namespace {

ComplexMatrix gaussian_matrix(int rows, int cols, Rng& rng) {
  ComplexMatrix m(rows, cols);
  // Column-major fill order fixes the stream consumption.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      m(r, c) = complex_gaussian(rng);
    }
  }
  return m;
}

} // namespace

ChannelRealization sample_channels(int num_users, int receive_antennas, int transmit_antennas,
                                   Rng& rng) {
  if (num_users < 1 || receive_antennas < 1 || transmit_antennas < 1) {
    throw std::domain_error("channel dimensions must be positive");
  }
  ChannelRealization out;
  out.users.reserve(static_cast<std::size_t>(num_users));
  for (int k = 0; k < num_users; ++k) {
    out.users.push_back(gaussian_matrix(receive_antennas, transmit_antennas, rng));
  }
  return out;
}

ComplexMatrix sample_beams(int transmit_antennas, Rng& rng) {
  if (transmit_antennas < 1) {
    throw std::domain_error("need at least one transmit antenna");
  }
  for (;;) {
    const ComplexMatrix g = gaussian_matrix(transmit_antennas, transmit_antennas, rng);
    const Eigen::HouseholderQR<ComplexMatrix> qr(g);
    const ComplexMatrix& packed = qr.matrixQR();
    ComplexMatrix q = qr.householderQ();
    bool singular = false;
    for (int i = 0; i < transmit_antennas; ++i) {
      const std::complex<double> d = packed(i, i);
      const double magnitude = std::abs(d);
      if (magnitude < 1e-12) {
        singular = true;
        break;
      }
      // Q R = Q D D^* R with D = diag(d/|d|) makes the factorization unique.
      q.col(i) *= d / magnitude;
    }
    if (!singular) {
      return q;
    }
  }
}

bool zf_snr_user(const ComplexMatrix& channel, const ComplexMatrix& beams, double rho,
                 std::span<double> out) {
  const ComplexMatrix effective = channel * beams;
  const ComplexMatrix gram = effective.adjoint() * effective;
  const Eigen::LLT<ComplexMatrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    return false;
  }
  const ComplexMatrix inverse =
      llt.solve(ComplexMatrix::Identity(gram.rows(), gram.cols()));
  for (Eigen::Index m = 0; m < inverse.rows(); ++m) {
    const double d = inverse(m, m).real();
    if (!(d > 0.0) || !std::isfinite(d)) {
      return false;
    }
    out[static_cast<std::size_t>(m)] = rho / d;
  }
  return true;
}

SnrTable zf_snr(const ChannelRealization& channels, const ComplexMatrix& beams, double rho) {
  if (channels.users.empty()) {
    throw std::domain_error("no users in channel realization");
  }
  const int beams_count = static_cast<int>(beams.cols());
  if (channels.users.front().rows() < beams_count) {
    throw std::domain_error("zero-forcing needs Mr >= Mt");
  }
  SnrTable table(static_cast<int>(channels.users.size()), beams_count);
  std::vector<double> row(static_cast<std::size_t>(beams_count));
  for (int k = 0; k < table.num_users(); ++k) {
    if (!zf_snr_user(channels.users[static_cast<std::size_t>(k)], beams, rho, row)) {
      throw NumericError(fmt::format("effective channel of user {} is singular", k));
    }
    for (int m = 0; m < beams_count; ++m) {
      table(k, m) = row[static_cast<std::size_t>(m)];
    }
  }
  return table;
}

SnrTable sample_snr_zf(double rho, int num_users, int receive_antennas, int transmit_antennas,
                       Rng& rng, ZfSampleStats* stats) {
  if (receive_antennas < transmit_antennas) {
    throw std::domain_error("zero-forcing needs Mr >= Mt");
  }
  const ComplexMatrix beams = sample_beams(transmit_antennas, rng);
  SnrTable table(num_users, transmit_antennas);
  std::vector<double> row(static_cast<std::size_t>(transmit_antennas));
  for (int k = 0; k < num_users; ++k) {
    for (;;) {
      const ComplexMatrix h = gaussian_matrix(receive_antennas, transmit_antennas, rng);
      if (zf_snr_user(h, beams, rho, row)) {
        break;
      }
      if (stats != nullptr) {
        ++stats->regenerated;
      }
    }
    for (int m = 0; m < transmit_antennas; ++m) {
      table(k, m) = row[static_cast<std::size_t>(m)];
    }
  }
  return table;
}

SnrTable sample_snr_direct(const SnrModel& model, int num_users, int num_beams, Rng& rng) {
  if (num_users < 1 || num_beams < 1) {
    throw std::domain_error("table dimensions must be positive");
  }
  SnrTable table(num_users, num_beams);
  const double rho = model.rho();
  for (int k = 0; k < num_users; ++k) {
    for (int m = 0; m < num_beams; ++m) {
      const double u = uniform01(rng);
      table(k, m) = model.is_exponential() ? -rho * std::log1p(-u) : model.inv_cdf(u);
    }
  }
  return table;
}

} // namespace mtfb
