// Acceptance gate: one [PASS]/[FAIL] line per top-level criterion, exit 0
// only when every criterion holds. Runs standalone (no test framework) so
// the output reads as a checklist.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "series2vec/series2vec.hpp"

#include "helpers.hpp"

using namespace s2v;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// --------------------------------------------------------------------------
// 1. gradient correctness: every differentiable op + the end-to-end loss
// --------------------------------------------------------------------------

Var probe_sum(Tape& t, const Var& x) {
  NdArray w(x.value().shape());
  for (std::size_t k = 0; k < w.numel(); ++k)
    w[k] = std::cos(0.7 * static_cast<double>(k) + 0.3) + 0.1;
  return sum_all(mul(x, t.constant(w)));
}

using OpBuilder = std::function<Var(Tape&, std::vector<Var>&)>;

bool op_gradients_ok(const OpBuilder& build, const std::vector<NdArray>& inputs,
                     const char* name, std::string& why) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const NdArray& x : inputs) vars.push_back(tape.param(x));
  Var out = build(tape, vars);
  tape.backward(out);
  std::vector<NdArray> analytic;
  analytic.reserve(vars.size());
  for (const Var& v : vars) analytic.push_back(tape.grad(v.id));

  const test::ScalarFn f = [&build](const std::vector<NdArray>& xs) {
    Tape t2;
    std::vector<Var> vs;
    vs.reserve(xs.size());
    for (const NdArray& x : xs) vs.push_back(t2.param(x));
    return build(t2, vs).value().scalar_value();
  };
  const test::FdMismatch m = test::fd_check(f, inputs, analytic);
  if (!m.ok)
    why = std::string(name) + ": input " + std::to_string(m.input) + " element " +
          std::to_string(m.element) + ", analytic " + fmt(m.analytic) +
          " vs numeric " + fmt(m.numeric);
  return m.ok;
}

bool end_to_end_gradients_ok(std::string& why) {
  TrainConfig tc;
  tc.encoder.layers = 2;
  tc.encoder.filters = 4;
  tc.encoder.kernel_width = 4;
  tc.encoder.repr_dim = 8;
  tc.attention_heads = 2;
  tc.seed = 5;
  const std::size_t B = 4, d = 2, L = 16;
  ModelState state = init_model(tc, d);

  Rng rng(91);
  // zero-init biases can leave relu pre-activations exactly on the kink
  // (dead upstream windows), where finite differences are invalid; nudge
  // every rank-1 tensor so the check runs at a differentiable point
  state.visit_all([&](const std::string&, NdArray& a) {
    if (a.rank() == 1)
      for (std::size_t k = 0; k < a.numel(); ++k) a[k] += rng.uniform(-0.25, 0.25);
  });
  std::vector<NdArray> samples;
  std::vector<SpectralSeries> spectra;
  NdArray time_inputs({B, d, L});
  for (std::size_t b = 0; b < B; ++b) {
    NdArray s = test::random_array({d, L}, rng);
    for (std::size_t k = 0; k < d * L; ++k) time_inputs[b * d * L + k] = s[k];
    spectra.push_back(real_dft_magnitude(s));
    samples.push_back(std::move(s));
  }
  detail::BranchBatch tb, fb;
  tb.inputs = time_inputs;
  tb.targets = pairwise_targets_time(samples, tc.dtw).values;
  std::vector<std::size_t> all_idx = {0, 1, 2, 3};
  fb.inputs = detail::stack_spectra(spectra, all_idx);
  fb.targets = pairwise_targets_frequency(spectra).values;

  std::vector<NdArray> params;
  state.visit_all([&](const std::string&, NdArray& a) { params.push_back(a); });

  Tape tape;
  std::vector<std::size_t> ids;
  Var loss = detail::pretext_loss(tape, state, &tb, &fb, true, &ids);
  tape.backward(loss);
  if (ids.size() != params.size()) {
    why = "parameter registry does not line up with visit order";
    return false;
  }
  std::vector<NdArray> analytic;
  analytic.reserve(ids.size());
  for (std::size_t id : ids) analytic.push_back(tape.grad(id));

  const test::ScalarFn f = [&](const std::vector<NdArray>& ps) {
    ModelState s = state;
    std::size_t i = 0;
    s.visit_all([&](const std::string&, NdArray& a) { a = ps[i++]; });
    Tape t2;
    return detail::pretext_loss(t2, s, &tb, &fb, true).value().scalar_value();
  };
  const test::FdMismatch m = test::fd_check(f, params, analytic);
  if (!m.ok)
    why = "end-to-end loss: parameter tensor " + std::to_string(m.input) +
          " element " + std::to_string(m.element) + ", analytic " +
          fmt(m.analytic) + " vs numeric " + fmt(m.numeric);
  return m.ok;
}

bool criterion_gradients(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(17);
  std::string why;
  std::size_t n_ops = 0;
  bool ok = true;
  auto run = [&](const char* name, const OpBuilder& b,
                 const std::vector<NdArray>& in) {
    if (!ok) return;
    ++n_ops;
    ok = op_gradients_ok(b, in, name, why);
  };

  run("add", [](Tape& t, std::vector<Var>& v) { return probe_sum(t, add(v[0], v[1])); },
      {test::random_array({3, 4}, rng), test::random_array({3, 4}, rng)});
  run("sub", [](Tape& t, std::vector<Var>& v) { return probe_sum(t, sub(v[0], v[1])); },
      {test::random_array({3, 4}, rng), test::random_array({3, 4}, rng)});
  run("mul", [](Tape& t, std::vector<Var>& v) { return probe_sum(t, mul(v[0], v[1])); },
      {test::random_array({3, 4}, rng), test::random_array({3, 4}, rng)});
  run("scale",
      [](Tape& t, std::vector<Var>& v) { return probe_sum(t, scale(v[0], -1.7)); },
      {test::random_array({2, 5}, rng)});
  run("sum_all", [](Tape&, std::vector<Var>& v) { return sum_all(v[0]); },
      {test::random_array({4, 3}, rng)});
  {
    NdArray x({3, 4});  // keep every input 0.25 away from the relu kink
    for (std::size_t k = 0; k < x.numel(); ++k)
      x[k] = (k % 2 ? 1.0 : -1.0) * rng.uniform(0.25, 1.0);
    run("relu", [](Tape& t, std::vector<Var>& v) { return probe_sum(t, relu(v[0])); },
        {x});
  }
  run("matmul",
      [](Tape& t, std::vector<Var>& v) { return probe_sum(t, matmul(v[0], v[1])); },
      {test::random_array({3, 4}, rng), test::random_array({4, 2}, rng)});
  run("matmul_nt",
      [](Tape& t, std::vector<Var>& v) { return probe_sum(t, matmul_nt(v[0], v[1])); },
      {test::random_array({3, 4}, rng), test::random_array({5, 4}, rng)});
  run("add_row_bias",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, add_row_bias(v[0], v[1]));
      },
      {test::random_array({4, 3}, rng), test::random_array({3}, rng)});
  run("col_slice",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, col_slice(v[0], 2, 5));
      },
      {test::random_array({3, 6}, rng)});
  run("concat_cols",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, concat_cols({v[0], v[1], v[2]}));
      },
      {test::random_array({2, 2}, rng), test::random_array({2, 3}, rng),
       test::random_array({2, 1}, rng)});
  run("softmax(rows)",
      [](Tape& t, std::vector<Var>& v) { return probe_sum(t, softmax(v[0], 1)); },
      {test::random_array({3, 4}, rng)});
  run("softmax(cols)",
      [](Tape& t, std::vector<Var>& v) { return probe_sum(t, softmax(v[0], 0)); },
      {test::random_array({3, 4}, rng)});
  run("layer_norm",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, layer_norm(v[0], v[1], v[2]));
      },
      {test::random_array({4, 6}, rng), test::random_array({6}, rng, 0.5, 1.5),
       test::random_array({6}, rng)});
  run("conv1d",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, conv1d(v[0], v[1], 1, 1));
      },
      {test::random_array({2, 8}, rng), test::random_array({3, 2, 3}, rng)});
  run("temporal_conv_same",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, temporal_conv_same(v[0], v[1], v[2]));
      },
      {test::random_array({2, 3, 8}, rng), test::random_array({4, 3}, rng),
       test::random_array({4}, rng)});
  run("spatial_conv",
      [](Tape& t, std::vector<Var>& v) {
        return probe_sum(t, spatial_conv(v[0], v[1], v[2]));
      },
      {test::random_array({2, 4, 3, 8}, rng), test::random_array({5, 4, 3}, rng),
       test::random_array({5}, rng)});
  {
    NdArray x = test::random_array({2, 3, 5}, rng);
    for (std::size_t k = 0; k < x.numel(); ++k)
      x[k] += static_cast<double>(k) * 1e-3;  // make every slice maximum unique
    run("max_pool_last",
        [](Tape& t, std::vector<Var>& v) {
          return probe_sum(t, max_pool_last(v[0]));
        },
        {x});
  }
  {
    NdArray targets({4, 4});
    Rng trng(33);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) {
        const double v = trng.uniform(0.0, 1.0);
        targets[i * 4 + j] = v;
        targets[j * 4 + i] = v;
      }
    run("sim_loss",
        [targets](Tape&, std::vector<Var>& v) { return sim_loss(v[0], targets); },
        {test::random_array({4, 5}, rng)});
  }
  {
    const std::vector<std::size_t> labels = {0, 2, 1, 1};
    run("cross_entropy_mean",
        [labels](Tape&, std::vector<Var>& v) {
          return cross_entropy_mean(v[0], labels);
        },
        {test::random_array({4, 3}, rng)});
  }

  if (ok) ok = end_to_end_gradients_ok(why);
  const double secs = seconds_since(t0);
  if (ok && secs >= 60.0) {
    ok = false;
    why = "over the 1-minute budget";
  }
  detail = ok ? std::to_string(n_ops) + " ops + end-to-end loss at B=4, rel tol 1e-4, " +
                    fmt(secs, 2) + " s"
              : why;
  return ok;
}

// --------------------------------------------------------------------------
// 2-3. warping-distance oracles
// --------------------------------------------------------------------------

std::vector<double> column(const NdArray& x, std::size_t t) {
  std::vector<double> c(x.size(0));
  for (std::size_t ch = 0; ch < c.size(); ++ch) c[ch] = x[ch * x.size(1) + t];
  return c;
}

bool criterion_dtw_enumeration(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(29);
  // fixture sets: every length 1..6 at one channel, 2..5 at two channels
  std::vector<std::vector<NdArray>> groups(2);
  for (std::size_t L = 1; L <= 6; ++L)
    groups[0].push_back(test::random_array({1, L}, rng, -2.0, 2.0));
  for (std::size_t L = 2; L <= 5; ++L)
    groups[1].push_back(test::random_array({2, L}, rng, -2.0, 2.0));

  const SoftDtwConfig plain{0.0, 0.0};
  std::size_t n_pairs = 0;
  for (const std::vector<NdArray>& g : groups)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i; j < g.size(); ++j) {
        const NdArray &a = g[i], &b = g[j];
        test::PathEnumerator en;
        en.la = a.size(1);
        en.lb = b.size(1);
        en.cell = [&](std::size_t ii, std::size_t jj) {
          return point_cost(column(a, ii), column(b, jj), ii, jj, 0.0);
        };
        en.run();
        ++n_pairs;
        if (soft_dtw(a, b, plain) != en.hard_min()) {
          detail = "pair " + std::to_string(i) + "," + std::to_string(j) +
                   " differs from the enumerated minimum";
          return false;
        }
      }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) {
    detail = "over the 10-second budget";
    return false;
  }
  detail = std::to_string(n_pairs) + " pairs bit-exact, " + fmt(secs, 2) + " s";
  return true;
}

bool criterion_softmin(std::string& detail) {
  Rng rng(31);
  const SoftDtwConfig hard{0.0, 0.0};
  const SoftDtwConfig soft{0.0, 0.01};
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const NdArray a = test::random_array({1, 20}, rng);
    const NdArray b = test::random_array({1, 20}, rng);
    const double h = soft_dtw(a, b, hard);
    const double s = soft_dtw(a, b, soft);
    if (s > h) {
      detail = "soft value exceeds the hard minimum on pair " + std::to_string(rep);
      return false;
    }
    worst = std::max(worst, std::abs(s - h));
  }
  if (worst >= 5e-2) {
    detail = "largest |soft - hard| = " + fmt(worst);
    return false;
  }
  detail = "50 pairs at L=20, largest gap " + fmt(worst, 3);
  return true;
}

// --------------------------------------------------------------------------
// 4. attention permutation equivariance
// --------------------------------------------------------------------------

bool criterion_equivariance(std::string& detail) {
  Rng rng(41);
  AttentionParams params = init_attention_params(16, 4, rng);
  const NdArray r5 = test::random_array({5, 16}, rng);
  std::vector<std::size_t> perm = {0, 1, 2, 3, 4};
  std::size_t n = 0;
  do {
    ++n;
    if (!permutation_equivariance_check(r5, perm, params)) {
      detail = "failed at a B=5 permutation";
      return false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  const NdArray r64 = test::random_array({64, 16}, rng);
  for (int rep = 0; rep < 20; ++rep) {
    const std::vector<std::size_t> p = rng.permutation(64);
    if (!permutation_equivariance_check(r64, p, params)) {
      detail = "failed at a random B=64 permutation";
      return false;
    }
  }
  detail = std::to_string(n) + " exhaustive B=5 + 20 random B=64, tol 1e-10";
  return true;
}

// --------------------------------------------------------------------------
// 5. smooth-L1 exactness and kink continuity
// --------------------------------------------------------------------------

bool criterion_smooth_l1(std::string& detail) {
  const std::pair<double, double> table[] = {
      {0.0, 0.0}, {0.5, 0.125}, {-0.5, 0.125}, {1.0, 0.5}, {-1.0, 0.5},
      {2.0, 1.5}, {-2.0, 1.5},  {3.0, 2.5},    {-3.0, 2.5}};
  for (const auto& [x, want] : table)
    if (smooth_l1(x) != want) {
      detail = "value at x=" + fmt(x) + " is " + fmt(smooth_l1(x)) + ", expected " +
               fmt(want);
      return false;
    }
  const double h = 1e-6;
  for (double x0 : {1.0, -1.0}) {
    const double left = (smooth_l1(x0) - smooth_l1(x0 - h)) / h;
    const double right = (smooth_l1(x0 + h) - smooth_l1(x0)) / h;
    if (std::abs(left - right) >= 1e-5) {
      detail = "derivative jumps by " + fmt(std::abs(left - right)) + " at x=" +
               fmt(x0);
      return false;
    }
  }
  detail = "9 exact values; one-sided slopes at |x|=1 agree within 1e-5";
  return true;
}

// --------------------------------------------------------------------------
// 6. spectral oracle
// --------------------------------------------------------------------------

bool criterion_spectral(std::string& detail) {
  Rng rng(53);
  double worst = 0.0;
  for (std::size_t L : {std::size_t{8}, std::size_t{16}, std::size_t{100}}) {
    const NdArray x = test::random_array({2, L}, rng);
    const NdArray fast = real_dft_magnitude(x).magnitudes;
    const NdArray naive = real_dft_magnitude_naive(x).magnitudes;
    for (std::size_t k = 0; k < fast.numel(); ++k)
      worst = std::max(worst, std::abs(fast[k] - naive[k]));
  }
  if (worst > 1e-9) {
    detail = "fast/naive magnitudes differ by " + fmt(worst);
    return false;
  }

  const std::size_t L = 64, bin = 5;
  NdArray tone({1, L});
  for (std::size_t t = 0; t < L; ++t)
    tone[t] = std::cos(2.0 * M_PI * static_cast<double>(bin * t) /
                       static_cast<double>(L));
  const NdArray mags = real_dft_magnitude(tone).magnitudes;
  double total = 0.0;
  for (std::size_t k = 1; k < mags.numel(); ++k) total += mags[k] * mags[k];
  const double share = mags[bin] * mags[bin] / total;
  if (share < 0.999) {
    detail = "tone bin holds only " + fmt(share) + " of non-DC energy";
    return false;
  }
  detail = "max |fast - naive| = " + fmt(worst, 2) + "; tone energy share " +
           fmt(share, 6);
  return true;
}

// --------------------------------------------------------------------------
// 7-10. scaled end-to-end experiments (runs shared across criteria)
// --------------------------------------------------------------------------

struct E2eRuns {
  Dataset train, test;
  TrainConfig cfg0;
  std::vector<double> full_acc;
  ModelState state0;
  std::vector<EpochStats> hist0;
  NdArray reps_train0, reps_test0;
};

TrainConfig e2e_config(std::uint64_t seed) {
  TrainConfig tc;
  tc.batch_size = 64;
  tc.epochs = 30;
  tc.patience = 30;  // run all epochs; early stop must not shorten the budget
  tc.seed = seed;
  return tc;
}

bool criterion_end_to_end(E2eRuns& e, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  Dataset ds = make_synthetic(SyntheticKind::tones, 3, 150, 64, 1, 0.3, 1234);
  znormalize(ds);
  const SplitResult sp = split(ds, 2.0 / 3.0, 0.0, 1.0 / 3.0, 7, true);
  e.train = sp.train;
  e.test = sp.test;

  for (std::uint64_t seed : {0, 1, 2}) {
    const TrainConfig tc = e2e_config(seed);
    PretrainResult res = pretrain(e.train, tc);
    NdArray rtr = extract_representations(e.train, res.state);
    NdArray rte = extract_representations(e.test, res.state);
    const double acc =
        linear_probe(rtr, *e.train.labels, rte, *e.test.labels).accuracy;
    e.full_acc.push_back(acc);
    if (seed == 0) {
      e.cfg0 = tc;
      e.state0 = res.state;
      e.hist0 = res.history;
      e.reps_train0 = std::move(rtr);
      e.reps_test0 = std::move(rte);
    }
  }
  const double med = median(e.full_acc);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << e.train.size() << " train / " << e.test.size() << " test, accuracies";
  for (double a : e.full_acc) d << ' ' << fmt(a, 3);
  d << ", median " << fmt(med, 3) << " vs 0.333 chance, " << fmt(secs, 1) << " s";
  detail = d.str();
  return med >= 0.90 && secs < 300.0;
}

bool criterion_ablation(const E2eRuns& e, std::string& detail) {
  std::vector<double> noatt_acc;
  for (std::uint64_t seed : {0, 1, 2}) {
    TrainConfig tc = e2e_config(seed);
    tc.use_attention = false;
    PretrainResult res = pretrain(e.train, tc);
    NdArray rtr = extract_representations(e.train, res.state);
    NdArray rte = extract_representations(e.test, res.state);
    noatt_acc.push_back(
        linear_probe(rtr, *e.train.labels, rte, *e.test.labels).accuracy);
  }
  const double med_full = median(e.full_acc), med_noatt = median(noatt_acc);
  detail = "median full " + fmt(med_full, 3) + " vs no-attention " +
           fmt(med_noatt, 3) + " over 3 shared seeds";
  return med_full >= med_noatt;
}

bool criterion_low_label(const E2eRuns& e, std::string& detail) {
  std::vector<double> acc5, acc50;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const std::vector<CurvePoint> curve =
        low_label_curve(e.reps_train0, *e.train.labels, e.reps_test0,
                        *e.test.labels, {5, 50}, 1, s);
    acc5.push_back(curve[0].mean_accuracy);
    acc50.push_back(curve[1].mean_accuracy);
  }
  const double m5 = median(acc5), m50 = median(acc50);
  detail = "median accuracy " + fmt(m50, 3) + " at 50/class vs " + fmt(m5, 3) +
           " at 5/class over 5 resamples";
  return m50 >= m5 - 0.02;
}

bool criterion_determinism(E2eRuns& e, std::string& detail) {
  PretrainResult rerun = pretrain(e.train, e.cfg0);
  if (rerun.history.size() != e.hist0.size()) {
    detail = "histories have different lengths";
    return false;
  }
  for (std::size_t i = 0; i < e.hist0.size(); ++i)
    if (rerun.history[i].train_loss != e.hist0[i].train_loss ||
        rerun.history[i].val_loss != e.hist0[i].val_loss) {
      detail = "loss history diverges at epoch " + std::to_string(i + 1);
      return false;
    }

  bool same = true;
  std::vector<const NdArray*> first;
  e.state0.visit_all(
      [&](const std::string&, NdArray& a) { first.push_back(&a); });
  std::size_t i = 0;
  rerun.state.visit_all([&](const std::string&, NdArray& a) {
    if (i >= first.size() || !(*first[i] == a)) same = false;
    ++i;
  });
  if (!same || i != first.size()) {
    detail = "checkpoint tensors differ between reruns";
    return false;
  }

  // byte-level check through the on-disk format as well
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "s2v_acceptance_ckpt";
  fs::create_directories(dir);
  save_checkpoint(e.state0, (dir / "a").string());
  save_checkpoint(rerun.state, (dir / "b").string());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  const bool bytes_equal = slurp(dir / "a.bin") == slurp(dir / "b.bin") &&
                           slurp(dir / "a.json") == slurp(dir / "b.json");
  fs::remove_all(dir);
  if (!bytes_equal) {
    detail = "serialized checkpoints are not byte-identical";
    return false;
  }
  detail = std::to_string(e.hist0.size()) + " epochs, " +
           std::to_string(first.size()) + " tensors bit-identical";
  return true;
}

// --------------------------------------------------------------------------
// 11. rank aggregation
// --------------------------------------------------------------------------

bool criterion_rank(std::string& detail) {
  const std::vector<double> tied = average_rank({{0.8}, {0.8}, {0.5}});
  if (tied != std::vector<double>{1.5, 1.5, 3.0}) {
    detail = "tie handling gave " + fmt(tied[0]) + ", " + fmt(tied[1]) + ", " +
             fmt(tied[2]);
    return false;
  }
  const std::vector<std::vector<double>> table = {{0.9, 0.95, 0.8, 0.99},
                                                  {0.5, 0.90, 0.7, 0.98},
                                                  {0.4, 0.10, 0.6, 0.97}};
  const std::vector<double> ranks = average_rank(table);
  if (ranks[0] != 1.0) {
    detail = "strictly-best model got rank " + fmt(ranks[0]);
    return false;
  }
  detail = "ties share positions; strict winner ranks 1.0";
  return true;
}

}  // namespace

int main() {
  std::string d;

  report(criterion_gradients(d), "gradient correctness (ops + end-to-end)", d);
  report(criterion_dtw_enumeration(d),
         "warping distance matches exhaustive enumeration", d);
  report(criterion_softmin(d), "soft minimum converges to the hard minimum", d);
  report(criterion_equivariance(d), "batch attention permutation equivariance", d);
  report(criterion_smooth_l1(d), "smooth-L1 values and derivative continuity", d);
  report(criterion_spectral(d), "spectral magnitudes match the direct transform", d);

  E2eRuns e2e;
  report(criterion_end_to_end(e2e, d),
         "pretraining + linear probe reaches 0.90 on the tones fixture", d);
  report(criterion_ablation(e2e, d), "full model at least matches no-attention", d);
  report(criterion_low_label(e2e, d), "more labels do not hurt the probe", d);
  report(criterion_determinism(e2e, d),
         "identical seeds give bit-identical checkpoints", d);
  report(criterion_rank(d), "average rank handles ties and strict winners", d);

  if (failures == 0) {
    std::cout << "all 11 criteria passed" << std::endl;
    return 0;
  }
  std::cout << failures << " criteria failed" << std::endl;
  return 1;
}
