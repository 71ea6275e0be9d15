#pragma once

#include <cstdint>
#include <vector>

#include "mirem/em.hpp"

namespace mirem {

enum class TuneMethod : std::uint8_t { Ebic, Cv };
enum class CvRule : std::uint8_t { Min, OneSe };

struct TuneConfig {
  TuneMethod method = TuneMethod::Ebic;
  std::vector<double> grid;
  int folds = 10;
  double xi = 2.0;
  EbicForm form = EbicForm::Power;
  CvRule rule = CvRule::Min;
};

// Log-spaced grid from 10^lo to 10^hi with `points` entries.
std::vector<double> log_grid(double lo, double hi, int points);

struct LambdaPoint {
  double lambda = 0.0;
  double value = 0.0;  // EBIC, or mean mis-classification error
  double se = 0.0;     // CV only
  double df = 0.0;     // EBIC only
  double q = 0.0;      // EBIC only
  int folds_used = 0;
  int folds_skipped = 0;
  bool usable = true;
};

struct TuneResult {
  double lambda_star = 0.0;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  TuneMethod method = TuneMethod::Ebic;
  std::vector<LambdaPoint> curve;
};

// One E-step at `theta`, then per grid point either an M-step scored by EBIC, or K-fold
// cross-validated mis-classification error of the phenotype equation.
TuneResult tune_lambda(const Dataset& data, const ModelSystem& theta, const EmConfig& cfg, const TuneConfig& tc,
                       std::uint64_t stream = 0);

}  // namespace mirem
