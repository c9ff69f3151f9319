#include "qbt/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qbt/errors.hpp"

namespace qbt::ode {
namespace {

// Dormand & Prince 8(5,3) tableau with its 7th-order continuous extension
// (Hairer, Norsett & Wanner, DOP853).
  constexpr double eps = 2.220446049250313E-016;
  constexpr double c2 = 0.526001519587677318785587544488e-01;
  constexpr double c3 = 0.789002279381515978178381316732e-01;
  constexpr double c4 = 0.118350341907227396726757197510e+00;
  constexpr double c5 = 0.281649658092772603273242802490e+00;
  constexpr double c6 = 0.333333333333333333333333333333e+00;
  constexpr double c7 = 0.25e+00;
  constexpr double c8 = 0.307692307692307692307692307692e+00;
  constexpr double c9 = 0.651282051282051282051282051282e+00;
  constexpr double c10 = 0.6e+00;
  constexpr double c11 = 0.857142857142857142857142857142e+00;
  constexpr double c14 = 0.1e+00;
  constexpr double c15 = 0.2e+00;
  constexpr double c16 = 0.777777777777777777777777777778e+00;
  constexpr double a21 = 5.26001519587677318785587544488e-2;
  constexpr double a31 = 1.97250569845378994544595329183e-2;
  constexpr double a32 = 5.91751709536136983633785987549e-2;
  constexpr double a41 = 2.95875854768068491816892993775e-2;
  constexpr double a43 = 8.87627564304205475450678981324e-2;
  constexpr double a51 = 2.41365134159266685502369798665e-1;
  constexpr double a53 = -8.84549479328286085344864962717e-1;
  constexpr double a54 = 9.24834003261792003115737966543e-1;
  constexpr double a61 = 3.7037037037037037037037037037e-2;
  constexpr double a64 = 1.70828608729473871279604482173e-1;
  constexpr double a65 = 1.25467687566822425016691814123e-1;
  constexpr double a71 = 3.7109375e-2;
  constexpr double a74 = 1.70252211019544039314978060272e-1;
  constexpr double a75 = 6.02165389804559606850219397283e-2;
  constexpr double a76 = -1.7578125e-2;
  constexpr double a81 = 3.70920001185047927108779319836e-2;
  constexpr double a84 = 1.70383925712239993810214054705e-1;
  constexpr double a85 = 1.07262030446373284651809199168e-1;
  constexpr double a86 = -1.53194377486244017527936158236e-2;
  constexpr double a87 = 8.27378916381402288758473766002e-3;
  constexpr double a91 = 6.24110958716075717114429577812e-1;
  constexpr double a94 = -3.36089262944694129406857109825e0;
  constexpr double a95 = -8.68219346841726006818189891453e-1;
  constexpr double a96 = 2.75920996994467083049415600797e1;
  constexpr double a97 = 2.01540675504778934086186788979e1;
  constexpr double a98 = -4.34898841810699588477366255144e1;
  constexpr double a101 = 4.77662536438264365890433908527e-1;
  constexpr double a104 = -2.48811461997166764192642586468e0;
  constexpr double a105 = -5.90290826836842996371446475743e-1;
  constexpr double a106 = 2.12300514481811942347288949897e1;
  constexpr double a107 = 1.52792336328824235832596922938e1;
  constexpr double a108 = -3.32882109689848629194453265587e1;
  constexpr double a109 = -2.03312017085086261358222928593e-2;
  constexpr double a111 = -9.3714243008598732571704021658e-1;
  constexpr double a114 = 5.18637242884406370830023853209e0;
  constexpr double a115 = 1.09143734899672957818500254654e0;
  constexpr double a116 = -8.14978701074692612513997267357e0;
  constexpr double a117 = -1.85200656599969598641566180701e1;
  constexpr double a118 = 2.27394870993505042818970056734e1;
  constexpr double a119 = 2.49360555267965238987089396762e0;
  constexpr double a1110 = -3.0467644718982195003823669022e0;
  constexpr double a121 = 2.27331014751653820792359768449e0;
  constexpr double a124 = -1.05344954667372501984066689879e1;
  constexpr double a125 = -2.00087205822486249909675718444e0;
  constexpr double a126 = -1.79589318631187989172765950534e1;
  constexpr double a127 = 2.79488845294199600508499808837e1;
  constexpr double a128 = -2.85899827713502369474065508674e0;
  constexpr double a129 = -8.87285693353062954433549289258e0;
  constexpr double a1210 = 1.23605671757943030647266201528e1;
  constexpr double a1211 = 6.43392746015763530355970484046e-1;
  constexpr double a141 = 5.61675022830479523392909219681e-2;
  constexpr double a147 = 2.53500210216624811088794765333e-1;
  constexpr double a148 = -2.46239037470802489917441475441e-1;
  constexpr double a149 = -1.24191423263816360469010140626e-1;
  constexpr double a1410 = 1.5329179827876569731206322685e-1;
  constexpr double a1411 = 8.20105229563468988491666602057e-3;
  constexpr double a1412 = 7.56789766054569976138603589584e-3;
  constexpr double a1413 = -8.298e-3;
  constexpr double a151 = 3.18346481635021405060768473261e-2;
  constexpr double a156 = 2.83009096723667755288322961402e-2;
  constexpr double a157 = 5.35419883074385676223797384372e-2;
  constexpr double a158 = -5.49237485713909884646569340306e-2;
  constexpr double a1511 = -1.08347328697249322858509316994e-4;
  constexpr double a1512 = 3.82571090835658412954920192323e-4;
  constexpr double a1513 = -3.40465008687404560802977114492e-4;
  constexpr double a1514 = 1.41312443674632500278074618366e-1;
  constexpr double a161 = -4.28896301583791923408573538692e-1;
  constexpr double a166 = -4.69762141536116384314449447206e0;
  constexpr double a167 = 7.68342119606259904184240953878e0;
  constexpr double a168 = 4.06898981839711007970213554331e0;
  constexpr double a169 = 3.56727187455281109270669543021e-1;
  constexpr double a1613 = -1.39902416515901462129418009734e-3;
  constexpr double a1614 = 2.9475147891527723389556272149e0;
  constexpr double a1615 = -9.15095847217987001081870187138e0;
  constexpr double b1 = 5.42937341165687622380535766363e-2;
  constexpr double b6 = 4.45031289275240888144113950566e0;
  constexpr double b7 = 1.89151789931450038304281599044e0;
  constexpr double b8 = -5.8012039600105847814672114227e0;
  constexpr double b9 = 3.1116436695781989440891606237e-1;
  constexpr double b10 = -1.52160949662516078556178806805e-1;
  constexpr double b11 = 2.01365400804030348374776537501e-1;
  constexpr double b12 = 4.47106157277725905176885569043e-2;
  constexpr double e31 = 0.244094488188976377952755905512e+00;
  constexpr double e32 = 0.733846688281611857341361741547e+00;
  constexpr double e33 = 0.220588235294117647058823529412e-01;
  constexpr double e51 = 0.1312004499419488073250102996e-01;
  constexpr double e56 = -0.1225156446376204440720569753e+01;
  constexpr double e57 = -0.4957589496572501915214079952e+00;
  constexpr double e58 = 0.1664377182454986536961530415e+01;
  constexpr double e59 = -0.3503288487499736816886487290e+00;
  constexpr double e510 = 0.3341791187130174790297318841e+00;
  constexpr double e511 = 0.8192320648511571246570742613e-01;
  constexpr double e512 = -0.2235530786388629525884427845e-01;
  constexpr double d41 = -0.84289382761090128651353491142e+01;
  constexpr double d46 = 0.56671495351937776962531783590e+00;
  constexpr double d47 = -0.30689499459498916912797304727e+01;
  constexpr double d48 = 0.23846676565120698287728149680e+01;
  constexpr double d49 = 0.21170345824450282767155149946e+01;
  constexpr double d410 = -0.87139158377797299206789907490e+00;
  constexpr double d411 = 0.22404374302607882758541771650e+01;
  constexpr double d412 = 0.63157877876946881815570249290e+00;
  constexpr double d413 = -0.88990336451333310820698117400e-01;
  constexpr double d414 = 0.18148505520854727256656404962e+02;
  constexpr double d415 = -0.91946323924783554000451984436e+01;
  constexpr double d416 = -0.44360363875948939664310572000e+01;
  constexpr double d51 = 0.10427508642579134603413151009e+02;
  constexpr double d56 = 0.24228349177525818288430175319e+03;
  constexpr double d57 = 0.16520045171727028198505394887e+03;
  constexpr double d58 = -0.37454675472269020279518312152e+03;
  constexpr double d59 = -0.22113666853125306036270938578e+02;
  constexpr double d510 = 0.77334326684722638389603898808e+01;
  constexpr double d511 = -0.30674084731089398182061213626e+02;
  constexpr double d512 = -0.93321305264302278729567221706e+01;
  constexpr double d513 = 0.15697238121770843886131091075e+02;
  constexpr double d514 = -0.31139403219565177677282850411e+02;
  constexpr double d515 = -0.93529243588444783865713862664e+01;
  constexpr double d516 = 0.35816841486394083752465898540e+02;
  constexpr double d61 = 0.19985053242002433820987653617e+02;
  constexpr double d66 = -0.38703730874935176555105901742e+03;
  constexpr double d67 = -0.18917813819516756882830838328e+03;
  constexpr double d68 = 0.52780815920542364900561016686e+03;
  constexpr double d69 = -0.11573902539959630126141871134e+02;
  constexpr double d610 = 0.68812326946963000169666922661e+01;
  constexpr double d611 = -0.10006050966910838403183860980e+01;
  constexpr double d612 = 0.77771377980534432092869265740e+00;
  constexpr double d613 = -0.27782057523535084065932004339e+01;
  constexpr double d614 = -0.60196695231264120758267380846e+02;
  constexpr double d615 = 0.84320405506677161018159903784e+02;
  constexpr double d616 = 0.11992291136182789328035130030e+02;
  constexpr double d71 = -0.25693933462703749003312586129e+02;
  constexpr double d76 = -0.15418974869023643374053993627e+03;
  constexpr double d77 = -0.23152937917604549567536039109e+03;
  constexpr double d78 = 0.35763911791061412378285349910e+03;
  constexpr double d79 = 0.93405324183624310003907691704e+02;
  constexpr double d710 = -0.37458323136451633156875139351e+02;
  constexpr double d711 = 0.10409964950896230045147246184e+03;
  constexpr double d712 = 0.29840293426660503123344363579e+02;
  constexpr double d713 = -0.43533456590011143754432175058e+02;
  constexpr double d714 = 0.96324553959188282948394950600e+02;
  constexpr double d715 = -0.39177261675615439165231486172e+02;
  constexpr double d716 = -0.14972683625798562581422125276e+03;

// PI controller for an error-per-unit-step estimate of order 7.
constexpr double kAlpha = 0.7 / 8.0;
constexpr double kBeta = 0.4 / 8.0;
constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.333;
constexpr double kMaxFactor = 6.0;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Stats integrate(const Rhs& f, double t0, double t1, std::vector<double>& y, const Options& options,
                const StepObserver& observer) {
  Stats stats;
  if (t0 == t1) return stats;
  const std::size_t n = y.size();
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double h_max = options.max_step > 0.0 ? std::min(options.max_step, span) : span;

  // k[s] holds stage s+1; stages 14-16 only feed the dense output.
  std::vector<std::vector<double>> k(16, std::vector<double>(n));
  std::vector<double> tmp(n), y_new(n), dense;
  if (options.dense) dense.resize(8 * n);
  if (!all_finite(y)) throw DivergenceError("non-finite initial state");
  f(t0, y, k[0]);
  ++stats.rhs_evaluations;

  double h = options.initial_step;
  if (h <= 0.0) {
    double ynorm = 0.0, fnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ynorm = std::max(ynorm, std::abs(y[i]));
      fnorm = std::max(fnorm, std::abs(k[0][i]));
    }
    h = fnorm > 0.0 ? 0.1 * std::max(1.0, ynorm) / fnorm : span;
    h *= std::pow(options.tol / 1e-6, 0.125);
  }
  h = std::clamp(h, 1e-8 * span, h_max);

  auto stage = [&](double t, double hs, double c, int out, std::initializer_list<std::pair<int, double>> terms) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& [s, a] : terms) acc += a * k[s][i];
      tmp[i] = y[i] + hs * acc;
    }
    f(t + c * hs, tmp, k[out]);
  };

  double t = t0;
  double err_prev = 1e-4;
  bool last_rejected = false;
  while (direction * (t1 - t) > 0.0) {
    if (stats.accepted + stats.rejected >= options.max_steps) {
      throw StiffnessError("step budget exhausted at t=" + std::to_string(t));
    }
    const double remaining = std::abs(t1 - t);
    if (h >= remaining) h = remaining;
    if (h < 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      throw StiffnessError("step size underflow at t=" + std::to_string(t));
    }
    const double hs = direction * h;

    stage(t, hs, c2, 1, {{0, a21}});
    stage(t, hs, c3, 2, {{0, a31}, {1, a32}});
    stage(t, hs, c4, 3, {{0, a41}, {2, a43}});
    stage(t, hs, c5, 4, {{0, a51}, {2, a53}, {3, a54}});
    stage(t, hs, c6, 5, {{0, a61}, {3, a64}, {4, a65}});
    stage(t, hs, c7, 6, {{0, a71}, {3, a74}, {4, a75}, {5, a76}});
    stage(t, hs, c8, 7, {{0, a81}, {3, a84}, {4, a85}, {5, a86}, {6, a87}});
    stage(t, hs, c9, 8, {{0, a91}, {3, a94}, {4, a95}, {5, a96}, {6, a97}, {7, a98}});
    stage(t, hs, c10, 9, {{0, a101}, {3, a104}, {4, a105}, {5, a106}, {6, a107}, {7, a108}, {8, a109}});
    stage(t, hs, c11, 10,
          {{0, a111}, {3, a114}, {4, a115}, {5, a116}, {6, a117}, {7, a118}, {8, a119}, {9, a1110}});
    stage(t, hs, 1.0, 11,
          {{0, a121}, {3, a124}, {4, a125}, {5, a126}, {6, a127}, {7, a128}, {8, a129}, {9, a1210}, {10, a1211}});
    stats.rhs_evaluations += 11;

    double err5 = 0.0, err3 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double incr = b1 * k[0][i] + b6 * k[5][i] + b7 * k[6][i] + b8 * k[7][i] + b9 * k[8][i] +
                          b10 * k[9][i] + b11 * k[10][i] + b12 * k[11][i];
      y_new[i] = y[i] + hs * incr;
      const double scale = options.tol * std::max(1.0, std::max(std::abs(y[i]), std::abs(y_new[i])));
      const double e3 = incr - e31 * k[0][i] - e32 * k[8][i] - e33 * k[11][i];
      const double e5 = e51 * k[0][i] + e56 * k[5][i] + e57 * k[6][i] + e58 * k[7][i] + e59 * k[8][i] +
                        e510 * k[9][i] + e511 * k[10][i] + e512 * k[11][i];
      err3 = std::max(err3, std::abs(e3) / scale);
      err5 = std::max(err5, std::abs(e5) / scale);
    }
    // Error per unit step, blending the 5th- and 3rd-order estimates.
    const double denom = err5 * err5 + 0.01 * err3 * err3;
    double err = denom > 0.0 ? err5 * err5 / std::sqrt(denom) : 0.0;
    if (!std::isfinite(err)) {
      if (!all_finite(y_new)) {
        if (h < 1e-12 * span) throw DivergenceError("non-finite state at t=" + std::to_string(t));
        h *= kMinFactor;
        ++stats.rejected;
        last_rejected = true;
        continue;
      }
      err = 1e10;
    }

    if (err <= 1.0) {
      f(t + hs, y_new, k[12]);
      ++stats.rhs_evaluations;
      const double t_new = (remaining - h <= 1e-15 * span) ? t1 : t + hs;
      if (observer) {
        if (options.dense) {
          stage(t, hs, c14, 13,
                {{0, a141}, {6, a147}, {7, a148}, {8, a149}, {9, a1410}, {10, a1411}, {11, a1412}, {12, a1413}});
          stage(t, hs, c15, 14,
                {{0, a151}, {5, a156}, {6, a157}, {7, a158}, {10, a1511}, {11, a1512}, {12, a1513}, {13, a1514}});
          stage(t, hs, c16, 15,
                {{0, a161}, {5, a166}, {6, a167}, {7, a168}, {8, a169}, {12, a1613}, {13, a1614}, {14, a1615}});
          stats.rhs_evaluations += 3;
          double* r = dense.data();
          for (std::size_t i = 0; i < n; ++i) {
            const double dy = y_new[i] - y[i];
            const double bspl = hs * k[0][i] - dy;
            r[i] = y[i];
            r[n + i] = dy;
            r[2 * n + i] = bspl;
            r[3 * n + i] = dy - hs * k[12][i] - bspl;
            r[4 * n + i] = hs * (d41 * k[0][i] + d46 * k[5][i] + d47 * k[6][i] + d48 * k[7][i] + d49 * k[8][i] +
                                 d410 * k[9][i] + d411 * k[10][i] + d412 * k[11][i] + d413 * k[12][i] +
                                 d414 * k[13][i] + d415 * k[14][i] + d416 * k[15][i]);
            r[5 * n + i] = hs * (d51 * k[0][i] + d56 * k[5][i] + d57 * k[6][i] + d58 * k[7][i] + d59 * k[8][i] +
                                 d510 * k[9][i] + d511 * k[10][i] + d512 * k[11][i] + d513 * k[12][i] +
                                 d514 * k[13][i] + d515 * k[14][i] + d516 * k[15][i]);
            r[6 * n + i] = hs * (d61 * k[0][i] + d66 * k[5][i] + d67 * k[6][i] + d68 * k[7][i] + d69 * k[8][i] +
                                 d610 * k[9][i] + d611 * k[10][i] + d612 * k[11][i] + d613 * k[12][i] +
                                 d614 * k[13][i] + d615 * k[14][i] + d616 * k[15][i]);
            r[7 * n + i] = hs * (d71 * k[0][i] + d76 * k[5][i] + d77 * k[6][i] + d78 * k[7][i] + d79 * k[8][i] +
                                 d710 * k[9][i] + d711 * k[10][i] + d712 * k[11][i] + d713 * k[12][i] +
                                 d714 * k[13][i] + d715 * k[14][i] + d716 * k[15][i]);
          }
        }
        observer(AcceptedStep{t, t_new, y, k[0], y_new, k[12], dense});
      }
      t = t_new;
      y.swap(y_new);
      k[0].swap(k[12]);
      ++stats.accepted;
      double factor = err == 0.0 ? kMaxFactor : kSafety * std::pow(err, -kAlpha) * std::pow(err_prev, kBeta);
      factor = std::clamp(factor, kMinFactor, last_rejected ? 1.0 : kMaxFactor);
      h = std::min(h * factor, h_max);
      err_prev = std::max(err, 1e-4);
      last_rejected = false;
    } else {
      h *= std::max(kMinFactor, kSafety * std::pow(err, -kAlpha));
      ++stats.rejected;
      last_rejected = true;
    }
  }
  if (!all_finite(y)) throw DivergenceError("non-finite final state");
  return stats;
}

void hermite_interpolate(const AcceptedStep& step, double t, std::span<double> out) {
  const double h = step.t1 - step.t0;
  const double s = (t - step.t0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = h00 * step.y0[i] + h10 * h * step.f0[i] + h01 * step.y1[i] + h11 * h * step.f1[i];
  }
}

namespace {

void evaluate_dense(std::span<const double> r, std::size_t n, double s, std::span<double> out) {
  const double s1 = 1.0 - s;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = r[6 * n + i] + s * r[7 * n + i];
    const double b = r[5 * n + i] + s1 * a;
    const double c = r[4 * n + i] + s * b;
    const double d = r[3 * n + i] + s1 * c;
    const double e = r[2 * n + i] + s * d;
    const double g = r[n + i] + s1 * e;
    out[i] = r[i] + s * g;
  }
}

}  // namespace

void interpolate(const AcceptedStep& step, double t, std::span<double> out) {
  if (step.dense.empty()) {
    hermite_interpolate(step, t, out);
    return;
  }
  evaluate_dense(step.dense, out.size(), (t - step.t0) / (step.t1 - step.t0), out);
}

DenseSampler::DenseSampler(std::vector<double> times, std::size_t dimension)
    : times_(std::move(times)), samples_(times_.size()), dimension_(dimension) {}

void DenseSampler::seed(double t0, std::span<const double> y0) {
  while (next_ < times_.size() && times_[next_] == t0) {
    samples_[next_].assign(y0.begin(), y0.end());
    ++next_;
  }
}

void DenseSampler::operator()(const AcceptedStep& step) {
  const double direction = step.t1 >= step.t0 ? 1.0 : -1.0;
  while (next_ < times_.size() && direction * (step.t1 - times_[next_]) >= 0.0) {
    const double t = times_[next_];
    auto& out = samples_[next_];
    if (t == step.t1) {
      out.assign(step.y1.begin(), step.y1.end());
    } else {
      out.resize(dimension_);
      interpolate(step, t, out);
    }
    ++next_;
  }
}

void DenseRecord::operator()(const AcceptedStep& step) {
  if (step.dense.size() != 8 * dimension_) throw ShapeError("dense record needs Options::dense");
  starts_.push_back(step.t0);
  ends_.push_back(step.t1);
  coefficients_.insert(coefficients_.end(), step.dense.begin(), step.dense.end());
}

void DenseRecord::clear() {
  starts_.clear();
  ends_.clear();
  coefficients_.clear();
}

void DenseRecord::evaluate(double t, std::span<double> out) const {
  if (starts_.empty()) throw PreconditionError("empty dense record");
  // Steps are stored in integration order; locate the one containing t.
  const bool forward = ends_.back() >= starts_.front();
  std::size_t idx;
  if (forward) {
    idx = static_cast<std::size_t>(std::lower_bound(ends_.begin(), ends_.end(), t) - ends_.begin());
  } else {
    idx = static_cast<std::size_t>(
        std::lower_bound(ends_.begin(), ends_.end(), t, [](double a, double b) { return a > b; }) - ends_.begin());
  }
  idx = std::min(idx, starts_.size() - 1);
  const std::span<const double> r(coefficients_.data() + idx * 8 * dimension_, 8 * dimension_);
  evaluate_dense(r, dimension_, (t - starts_[idx]) / (ends_[idx] - starts_[idx]), out);
}

}  // namespace qbt::ode
