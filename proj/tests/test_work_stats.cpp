#include <catch2/catch_amalgamated.hpp>

#include "qwork/dynamics.hpp"
#include "qwork/thermo.hpp"
#include "qwork/work_stats.hpp"
#include "test_helpers.hpp"

using namespace qwork;
using qwork::testing::atomwise_distance;
using qwork::testing::make_rng;
using qwork::testing::random_dephasing_model;
using qwork::testing::random_hermitian;

namespace {

DephasingModel zero_coupling_model(std::mt19937_64& rng, Index ds, Index db) {
  std::normal_distribution<double> nd;
  RealVector energies(ds);
  for (Index n = 0; n < ds; ++n) energies(n) = nd(rng);
  std::vector<HermitianOperator> couplings(ds, HermitianOperator::zero(db));
  return DephasingModel(energies, random_hermitian(rng, db), std::move(couplings));
}

DephasingModel scalar_coupling_model(std::mt19937_64& rng, Index ds, Index db,
                                     const std::vector<double>& shifts) {
  std::normal_distribution<double> nd;
  RealVector energies(ds);
  for (Index n = 0; n < ds; ++n) energies(n) = nd(rng);
  std::vector<HermitianOperator> couplings;
  for (Index n = 0; n < ds; ++n) couplings.push_back(shifts[n] * HermitianOperator::identity(db));
  return DephasingModel(energies, random_hermitian(rng, db), std::move(couplings));
}

}  // namespace

TEST_CASE("work distribution atom handling") {
  SECTION("coalescing merges within the window and preserves the mean") {
    std::vector<WorkAtom> raw{{1.0, 0.25}, {1.0 + 2e-10, 0.25}, {2.0, 0.5}};
    const auto d = make_work_distribution(raw, 1.0);
    REQUIRE(d.atoms.size() == 2);
    CHECK(std::abs(d.atoms[0].p - 0.5) < 1e-15);
    CHECK(std::abs(d.mean() - (0.25 * 1.0 + 0.25 * (1.0 + 2e-10) + 0.5 * 2.0)) < 1e-15);
  }

  SECTION("roundoff-negative weights are clipped, real ones rejected") {
    const auto d = make_work_distribution({{0.0, 1.0}, {1.0, -5e-15}}, 1.0);
    REQUIRE(d.atoms.size() == 1);
    CHECK_THROWS_AS(make_work_distribution({{0.0, 1.1}, {1.0, -0.1}}, 1.0), invariant_violation);
  }

  SECTION("normalization is enforced") {
    CHECK_THROWS_AS(make_work_distribution({{0.0, 0.5}}, 1.0), invariant_violation);
  }
}

TEST_CASE("block decomposition of the work distribution") {
  auto rng = make_rng(301);
  const ThermalContext ctx(1.0);

  SECTION("no quench: single atom at zero") {
    const auto m = zero_coupling_model(rng, 3, 4);
    const auto bw = block_work_set(m, ctx);
    for (const auto& d : bw.per_level) {
      REQUIRE(d.atoms.size() == 1);
      CHECK(std::abs(d.atoms[0].w) < 1e-12);
      CHECK(std::abs(d.atoms[0].p - 1.0) < 1e-12);
    }
  }

  SECTION("scalar couplings shift the spectrum rigidly") {
    const std::vector<double> shifts{0.7, -0.3, 0.1};
    const auto m = scalar_coupling_model(rng, 3, 5, shifts);
    const auto bw = block_work_set(m, ctx);
    for (Index n = 0; n < 3; ++n) {
      REQUIRE(bw.per_level[n].atoms.size() == 1);
      CHECK(std::abs(bw.per_level[n].atoms[0].w - shifts[n]) < 1e-10);
      CHECK(std::abs(bw.per_level[n].atoms[0].p - 1.0) < 1e-12);
    }
  }

  SECTION("each block matches an independent TPM on the environment space") {
    const auto m = random_dephasing_model(rng, 2, 4);
    const auto bw = block_work_set(m, ctx);
    for (Index n = 0; n < 2; ++n) {
      const auto oracle = brute_force_tpm(m.env_hamiltonian, m.block(n), ctx);
      CHECK(atomwise_distance(bw.per_level[n], oracle) < 1e-10);
    }
  }

  SECTION("transition matrices are doubly stochastic") {
    const auto m = random_dephasing_model(rng, 3, 6);
    const auto bw = block_work_set(m, ctx);
    for (const auto& p : bw.transitions) {
      for (Index k = 0; k < p.rows(); ++k) CHECK(std::abs(p.row(k).sum() - 1.0) < 1e-10);
      for (Index c = 0; c < p.cols(); ++c) CHECK(std::abs(p.col(c).sum() - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("mixture distribution") {
  auto rng = make_rng(302);
  const ThermalContext ctx(0.8);

  SECTION("single level passes through") {
    const auto m = random_dephasing_model(rng, 1, 5);
    const auto bw = block_work_set(m, ctx);
    const auto mix = work_distribution(bw, system_populations(m, ctx));
    CHECK(atomwise_distance(mix, bw.per_level[0]) < 1e-14);
  }

  SECTION("mean work is the population-weighted coupling average") {
    const auto m = random_dephasing_model(rng, 3, 5);
    const auto bw = block_work_set(m, ctx);
    const RealVector pops = system_populations(m, ctx);
    const auto mix = work_distribution(bw, pops);
    const auto rho_b = thermal_state(m.env_hamiltonian, ctx);
    double expected = 0.0;
    for (Index n = 0; n < 3; ++n)
      expected += pops(n) * (m.couplings[n].mat() * rho_b.mat()).trace().real();
    CHECK(std::abs(mix.mean() - expected) < 1e-10);
  }

  SECTION("mean work equals Tr{H_I rho(0)} on the full space") {
    const auto m = random_dephasing_model(rng, 3, 4);
    const auto bw = block_work_set(m, ctx);
    const auto mix = work_distribution(bw, system_populations(m, ctx));
    const auto [h0, h] = assemble_total_hamiltonians(m);
    const Matrix rho0 = thermal_state(h0, ctx).mat();
    const double oracle = (interaction_hamiltonian(m).mat() * rho0).trace().real();
    CHECK(std::abs(mix.mean() - oracle) < 1e-10);
  }

  SECTION("opposite couplings against a zero-mean bath give zero work") {
    // Linear bosonic coupling: Tr{B rho_B} = 0, so <w> = 0 at any beta.
    const BosonBathSpec s{{1.0}, {0.4}, {8}};
    const auto bath = build_boson_bath(s);
    const auto m = build_qubit_model(QubitSpec{1.3}, bath.hamiltonian, bath.coupling);
    const auto bw = block_work_set(m, ctx);
    const auto mix = work_distribution(bw, system_populations(m, ctx));
    CHECK(std::abs(mix.mean()) < 1e-12);
  }
}

TEST_CASE("work moments") {
  auto rng = make_rng(303);
  const ThermalContext ctx(1.0);

  SECTION("single atom") {
    const auto d = make_work_distribution({{0.7, 1.0}}, 1.0);
    const auto ms = moments(d, 4);
    for (int k = 1; k <= 4; ++k) CHECK(std::abs(ms[k - 1] - std::pow(0.7, k)) < 1e-14);
  }

  SECTION("qubit second moment is Tr{B^2 rho_B}") {
    const HermitianOperator hb = random_hermitian(rng, 5);
    const HermitianOperator b = random_hermitian(rng, 5, 0.6);
    const auto m = build_qubit_model(QubitSpec{0.9}, hb, b);
    const auto bw = block_work_set(m, ctx);
    const auto mix = work_distribution(bw, system_populations(m, ctx));
    const auto rho_b = thermal_state(hb, ctx);
    const double oracle = (b.mat() * b.mat() * rho_b.mat()).trace().real();
    CHECK(std::abs(mix.moment(2) - oracle) < 1e-10);
  }

  SECTION("homogeneous fermion moments reduce to number-operator moments") {
    const double g = 0.45, omega = 1.2, beta = 0.7;
    const FermionBathSpec s{1.0, 0.3, 5, std::vector<double>(5, g), Boundary::periodic};
    const auto bath = build_fermion_bath(s);
    const auto m = build_qubit_model(QubitSpec{omega}, bath.hamiltonian, bath.coupling);
    const ThermalContext fctx(beta);
    const auto bw = commuting_fast_path(m, fctx);
    const auto mix = work_distribution(bw, system_populations(m, fctx));
    const double unbalance = std::tanh(0.5 * beta * omega);

    const Matrix rho_b = thermal_state(bath.hamiltonian, fctx).mat();
    Matrix n_op = Matrix::Zero(32, 32);
    for (Index idx = 0; idx < 32; ++idx)
      n_op(idx, idx) = static_cast<double>(__builtin_popcount(static_cast<unsigned>(idx)));
    Matrix n_pow = n_op;
    for (int k = 1; k <= 4; ++k) {
      const double n_moment = (n_pow * rho_b).trace().real();
      const double factor = (k % 2 == 1) ? unbalance : 1.0;
      CHECK(std::abs(mix.moment(k) - std::pow(g, k) * factor * n_moment) < 1e-9);
      n_pow = n_pow * n_op;
    }
  }
}

TEST_CASE("fluctuation relations") {
  auto rng = make_rng(304);
  const ThermalContext ctx(1.4);

  SECTION("per-level identity is trivial without a quench") {
    const auto m = zero_coupling_model(rng, 2, 4);
    const auto bw = block_work_set(m, ctx);
    for (const auto& jp : jarzynski_block(bw, ctx)) {
      CHECK(std::abs(jp.exp_mean - 1.0) < 1e-12);
      CHECK(std::abs(jp.exp_delta_f - 1.0) < 1e-12);
    }
  }

  SECTION("rigid shifts give e^{-beta c_n} on both sides") {
    const std::vector<double> shifts{0.5, -0.2};
    const auto m = scalar_coupling_model(rng, 2, 4, shifts);
    const auto bw = block_work_set(m, ctx);
    const auto pairs = jarzynski_block(bw, ctx);
    for (Index n = 0; n < 2; ++n) {
      CHECK(std::abs(pairs[n].exp_mean - std::exp(-ctx.beta * shifts[n])) < 1e-10);
      CHECK(pairs[n].residual < 1e-12);
    }
  }

  SECTION("per-level residuals vanish for random baths") {
    const auto m = random_dephasing_model(rng, 3, 5);
    const auto bw = block_work_set(m, ctx);
    for (const auto& jp : jarzynski_block(bw, ctx)) CHECK(jp.residual < 1e-9);
  }

  SECTION("global identity and the full-space partition ratio") {
    const FermionBathSpec s{1.0, 0.0, 2, {0.5, 0.5}, Boundary::periodic};
    const auto bath = build_fermion_bath(s);
    const auto m = build_qubit_model(QubitSpec{1.0}, bath.hamiltonian, bath.coupling);
    const auto bw = block_work_set(m, ctx);
    const RealVector pops = system_populations(m, ctx);
    const auto jg = jarzynski_global(work_distribution(bw, pops), bw, pops, ctx);
    CHECK(jg.residual < 1e-9);
    const auto fs = jarzynski_full_space_check(m, ctx);
    CHECK(fs.residual < 1e-9);
    CHECK(std::abs(jg.exp_delta_f - fs.z_ratio) < 1e-9 * std::abs(fs.z_ratio));
  }

  SECTION("zero couplings give (1, 1)") {
    const auto m = zero_coupling_model(rng, 3, 3);
    const auto bw = block_work_set(m, ctx);
    const RealVector pops = system_populations(m, ctx);
    const auto jg = jarzynski_global(work_distribution(bw, pops), bw, pops, ctx);
    CHECK(std::abs(jg.exp_mean - 1.0) < 1e-12);
    CHECK(std::abs(jg.exp_delta_f - 1.0) < 1e-12);
  }
}

TEST_CASE("bound chain") {
  auto rng = make_rng(305);
  const ThermalContext ctx(1.0);

  SECTION("all three quantities vanish without a quench") {
    const auto m = zero_coupling_model(rng, 2, 4);
    const auto bw = block_work_set(m, ctx);
    const auto r = bound_chain(bw, system_populations(m, ctx), ctx);
    CHECK(std::abs(r.mean_work) < 1e-12);
    CHECK(std::abs(r.intermediate_bound) < 1e-12);
    CHECK(std::abs(r.delta_f) < 1e-12);
  }

  SECTION("deterministic blocks saturate the intermediate bound") {
    const std::vector<double> shifts{0.9, -0.4, 0.2};
    const auto m = scalar_coupling_model(rng, 3, 4, shifts);
    const auto bw = block_work_set(m, ctx);
    const RealVector pops = system_populations(m, ctx);
    const auto r = bound_chain(bw, pops, ctx);
    double expected = 0.0;
    for (Index n = 0; n < 3; ++n) expected += pops(n) * shifts[n];
    CHECK(std::abs(r.mean_work - expected) < 1e-10);
    CHECK(std::abs(r.gap_mean_vs_bound) < 1e-9);
  }

  SECTION("chain ordering holds on random models") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = random_dephasing_model(rng, 3, 5);
      const auto bw = block_work_set(m, ctx);
      const auto r = bound_chain(bw, system_populations(m, ctx), ctx);
      CHECK(r.gap_mean_vs_bound >= -1e-9);
      CHECK(r.gap_bound_vs_delta_f >= -1e-9);
      CHECK(r.irreversible_work >= -1e-9);
    }
  }

  SECTION("gap shrinks as the scaled-coupling chain grows") {
    const double g_prime = 1.0;
    double previous_gap = std::numeric_limits<double>::infinity();
    for (int sites : {2, 4, 8}) {
      const double g = g_prime / sites;
      const FermionBathSpec s{1.0, 0.0, sites, std::vector<double>(sites, g),
                              Boundary::periodic};
      const auto bath = build_fermion_bath(s);
      const auto m = build_qubit_model(QubitSpec{1.0}, bath.hamiltonian, bath.coupling);
      const auto bw = commuting_fast_path(m, ctx);
      const auto r = bound_chain(bw, system_populations(m, ctx), ctx);
      CHECK(r.gap_mean_vs_bound >= 0.0);
      CHECK(r.gap_mean_vs_bound < previous_gap);
      previous_gap = r.gap_mean_vs_bound;
    }
  }
}

TEST_CASE("commuting fast path") {
  auto rng = make_rng(306);
  const ThermalContext ctx(0.9);

  SECTION("homogeneous fermion atoms sit at g times the occupation numbers") {
    const double g = 0.3;
    const FermionBathSpec s{1.0, 0.2, 4, std::vector<double>(4, g), Boundary::periodic};
    const auto bath = build_fermion_bath(s);
    const auto m = build_qubit_model(QubitSpec{1.0}, bath.hamiltonian, bath.coupling);
    const auto bw = commuting_fast_path(m, ctx);
    // Level 0 couples with +g N: atoms at {0, g, 2g, 3g, 4g}.
    REQUIRE(bw.per_level[0].atoms.size() == 5);
    for (Index k = 0; k < 5; ++k)
      CHECK(std::abs(bw.per_level[0].atoms[k].w - g * static_cast<double>(k)) < 1e-12);
    // Independent occupancy-enumeration oracle for the weights.
    const auto eps = single_particle_spectrum(s);
    std::vector<double> weight(5, 0.0);
    double z = 0.0;
    for (unsigned subset = 0; subset < 16; ++subset) {
      double e = 0.0;
      for (int k = 0; k < 4; ++k)
        if (subset & (1u << k)) e += eps[k];
      const double boltz = std::exp(-ctx.beta * e);
      z += boltz;
      weight[__builtin_popcount(subset)] += boltz;
    }
    for (Index k = 0; k < 5; ++k)
      CHECK(std::abs(bw.per_level[0].atoms[k].p - weight[k] / z) < 1e-12);
  }

  SECTION("scalar couplings produce single deterministic atoms") {
    const std::vector<double> shifts{0.25, -0.6};
    const auto m = scalar_coupling_model(rng, 2, 5, shifts);
    const auto bw = commuting_fast_path(m, ctx);
    for (Index n = 0; n < 2; ++n) {
      REQUIRE(bw.per_level[n].atoms.size() == 1);
      CHECK(std::abs(bw.per_level[n].atoms[0].w - shifts[n]) < 1e-12);
    }
  }

  SECTION("agrees with the generic path on simultaneously diagonal models") {
    std::normal_distribution<double> nd;
    RealVector hd(6), b0(6), b1(6);
    for (Index i = 0; i < 6; ++i) {
      hd(i) = nd(rng);
      b0(i) = nd(rng);
      b1(i) = nd(rng);
    }
    RealVector energies(2);
    energies << -0.4, 0.4;
    const DephasingModel m(energies, HermitianOperator::diagonal(hd),
                           {HermitianOperator::diagonal(b0), HermitianOperator::diagonal(b1)});
    const auto fast = commuting_fast_path(m, ctx);
    const auto generic = block_work_set(m, ctx);
    for (Index n = 0; n < 2; ++n)
      CHECK(atomwise_distance(fast.per_level[n], generic.per_level[n]) < 1e-12);
    CHECK(std::abs(fast.env_free_energy - generic.env_free_energy) < 1e-12);
    for (Index n = 0; n < 2; ++n)
      CHECK(std::abs(fast.block_free_energies[n] - generic.block_free_energies[n]) < 1e-12);
  }

  SECTION("agrees with the generic path for commuting but non-diagonal couplings") {
    // Build H_B and B commuting but dense: both functions of one Hermitian R.
    const HermitianOperator r = random_hermitian(rng, 5);
    const auto rd = eig_hermitian(r);
    const Matrix hb = rd.apply([](double x) { return Complex(x, 0); });
    const Matrix b = rd.apply([](double x) { return Complex(std::sin(3.0 * x), 0); });
    RealVector energies(2);
    energies << -0.3, 0.5;
    const DephasingModel m(energies, HermitianOperator(hb, 1e-10),
                           {HermitianOperator(b, 1e-10), HermitianOperator(-b, 1e-10)});
    const auto fast = commuting_fast_path(m, ctx);
    const auto generic = block_work_set(m, ctx);
    for (Index n = 0; n < 2; ++n)
      CHECK(atomwise_distance(fast.per_level[n], generic.per_level[n]) < 1e-10);
  }

  SECTION("rejects non-commuting couplings") {
    const auto m = random_dephasing_model(rng, 2, 4);
    CHECK_THROWS_AS(commuting_fast_path(m, ctx), std::invalid_argument);
  }
}

TEST_CASE("brute force two-point-measurement oracle") {
  auto rng = make_rng(307);
  const ThermalContext ctx(1.1);

  SECTION("no quench gives a single zero atom") {
    const HermitianOperator h = random_hermitian(rng, 6);
    const auto d = brute_force_tpm(h, h, ctx);
    REQUIRE(d.atoms.size() == 1);
    CHECK(std::abs(d.atoms[0].w) < 1e-12);
  }

  SECTION("block route equals the full-space oracle") {
    const auto m = random_dephasing_model(rng, 2, 3);
    const auto bw = block_work_set(m, ctx);
    const auto mix = work_distribution(bw, system_populations(m, ctx));
    const auto [h0, h] = assemble_total_hamiltonians(m);
    const auto oracle = brute_force_tpm(h0, h, ctx);
    CHECK(atomwise_distance(mix, oracle) < 1e-9);
  }

  SECTION("degenerate system spectrum still matches after coalescing") {
    const HermitianOperator hb = random_hermitian(rng, 4);
    const HermitianOperator b = random_hermitian(rng, 4, 0.5);
    const auto m = build_qubit_model(QubitSpec{0.0}, hb, b);  // omega = 0: degenerate H_0
    const auto bw = block_work_set(m, ctx);
    const auto mix = work_distribution(bw, system_populations(m, ctx));
    const auto [h0, h] = assemble_total_hamiltonians(m);
    const auto oracle = brute_force_tpm(h0, h, ctx);
    CHECK(atomwise_distance(mix, oracle) < 1e-9);
  }
}

TEST_CASE("cyclic switch-off work") {
  auto rng = make_rng(308);
  const ThermalContext ctx(1.0);

  SECTION("immediate undo costs nothing") {
    const auto m = random_dephasing_model(rng, 2, 4);
    CHECK(std::abs(cyclic_switchoff_work(m, ctx, 0.0)) < 1e-12);
  }

  SECTION("scalar couplings commute with H and give zero at any time") {
    const auto m = scalar_coupling_model(rng, 2, 4, {0.4, -0.7});
    for (double t : {0.3, 1.0, 2.7}) CHECK(std::abs(cyclic_switchoff_work(m, ctx, t)) < 1e-10);
  }

  SECTION("equals the environment energy change and is non-negative") {
    const HermitianOperator hb = random_hermitian(rng, 4);
    const HermitianOperator b = random_hermitian(rng, 4, 0.8);
    const auto m = build_qubit_model(QubitSpec{1.0}, hb, b);
    const double w_tot = cyclic_switchoff_work(m, ctx, 1.0);
    CHECK(w_tot >= 0.0);

    const auto [h0, h] = assemble_total_hamiltonians(m);
    const Matrix rho0 = thermal_state(h0, ctx).mat();
    const Matrix u = eig_hermitian(h).propagator(1.0);
    const Matrix rho_t = u * rho0 * u.adjoint();
    const Matrix hb_full = tensor_product(Matrix::Identity(2, 2), hb.mat());
    const double env_change = (hb_full * (rho_t - rho0)).trace().real();
    CHECK(std::abs(w_tot - env_change) < 1e-10);
  }
}

TEST_CASE("oracle equivalence across random models") {
  auto rng = make_rng(309);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<Index> ds_dist(1, 4), db_dist(2, 8);
    std::uniform_real_distribution<double> beta_dist(0.1, 5.0);
    const Index ds = ds_dist(rng), db = db_dist(rng);
    const ThermalContext ctx(beta_dist(rng));
    const auto m = random_dephasing_model(rng, ds, db);
    const auto bw = block_work_set(m, ctx);
    const RealVector pops = system_populations(m, ctx);
    const auto mix = work_distribution(bw, pops);
    CHECK(std::abs(mix.total_probability() - 1.0) < 1e-10);

    const auto [h0, h] = assemble_total_hamiltonians(m);
    CHECK(atomwise_distance(mix, brute_force_tpm(h0, h, ctx)) < 1e-9);

    for (const auto& jp : jarzynski_block(bw, ctx)) CHECK(jp.residual < 1e-9);
    CHECK(jarzynski_global(mix, bw, pops, ctx).residual < 1e-9);
    CHECK_NOTHROW(bound_chain(bw, pops, ctx));
  }
}
