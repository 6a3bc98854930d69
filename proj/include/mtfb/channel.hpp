#pragma once

#include "mtfb/rng.hpp"
#include "mtfb/stats.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace mtfb {

using ComplexMatrix = Eigen::MatrixXcd;

/// Per-user Mr x Mt channels with i.i.d. CN(0, 1) entries.
struct ChannelRealization {
  std::vector<ComplexMatrix> users;
};

/// Post-ZF SNR of every (user, beam) pair, linear units, row-major K x Mt.
class SnrTable {
public:
  SnrTable() = default;
  SnrTable(int num_users, int num_beams)
      : users_(num_users), beams_(num_beams),
        values_(static_cast<std::size_t>(num_users) * static_cast<std::size_t>(num_beams)) {}

  int num_users() const noexcept { return users_; }
  int num_beams() const noexcept { return beams_; }

  double operator()(int user, int beam) const { return values_[index(user, beam)]; }
  double& operator()(int user, int beam) { return values_[index(user, beam)]; }

  std::span<const double> values() const noexcept { return values_; }

private:
  std::size_t index(int user, int beam) const {
    return static_cast<std::size_t>(user) * static_cast<std::size_t>(beams_) +
           static_cast<std::size_t>(beam);
  }

  int users_ = 0;
  int beams_ = 0;
  std::vector<double> values_;
};

ChannelRealization sample_channels(int num_users, int receive_antennas, int transmit_antennas,
                                   Rng& rng);

/// Haar-distributed Mt x Mt unitary: QR of a complex Gaussian matrix with the
/// triangular factor's diagonal made real-positive.
ComplexMatrix sample_beams(int transmit_antennas, Rng& rng);

/// SNR of beam m at one user: rho / [((H W)^* (H W))^{-1}]_mm.
/// Returns false when the effective channel is numerically singular.
bool zf_snr_user(const ComplexMatrix& channel, const ComplexMatrix& beams, double rho,
                 std::span<double> out);

/// Throws NumericError if any user's effective channel is singular.
SnrTable zf_snr(const ChannelRealization& channels, const ComplexMatrix& beams, double rho);

struct ZfSampleStats {
  long regenerated = 0;
};

/// Full physical-layer path: draw beams and channels, apply ZF. Singular
/// draws (measure zero) are redrawn and counted in `stats`.
SnrTable sample_snr_zf(double rho, int num_users, int receive_antennas, int transmit_antennas,
                       Rng& rng, ZfSampleStats* stats = nullptr);

/// Direct inverse-CDF draws from the model; same distribution as the ZF path.
SnrTable sample_snr_direct(const SnrModel& model, int num_users, int num_beams, Rng& rng);

} // namespace mtfb
