#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace decolab;
using namespace testing_support;

TEST(Format, SeventeenDigitsRoundTrip) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<Real> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    Real x = u(gen) * std::pow(10.0, i % 40 - 20);
    EXPECT_EQ(std::stod(io::format_real(x)), x);
  }
}

TEST(Json, StateRoundTripIsExact) {
  std::mt19937_64 gen(2);
  TensorSpace sp({{"a", 2}, {"b", 3}});
  auto psi = random_state(gen, sp);
  std::string text = io::to_json(psi).dump();
  auto back = io::state_from_json(io::json::parse(text));
  EXPECT_EQ(back, psi);
  EXPECT_EQ(back.space(), sp);
}

TEST(Json, DensityRoundTripIsExact) {
  std::mt19937_64 gen(3);
  TensorSpace sp("a", 4);
  auto rho = random_density(gen, sp, 2);
  auto back = io::density_from_json(io::json::parse(io::to_json(rho).dump()));
  EXPECT_TRUE((back.matrix().array() == rho.matrix().array()).all());
}

TEST(Json, Layout) {
  StateVector psi(TensorSpace("q", 2), {0.6, Complex(0, 0.8)});
  auto j = io::to_json(psi);
  EXPECT_EQ(j["space"], io::json::parse(R"([["q", 2]])"));
  EXPECT_EQ(j["amplitudes"][1], io::json::parse("[0.0, 0.8]"));
  EXPECT_THROW(io::space_from_json(io::json::parse(R"([["q"]])")), Error);
  EXPECT_THROW(io::complex_from_json(io::json::parse(R"("x")")), Error);
  EXPECT_THROW(io::matrix_from_json(io::json::parse("[[1, 2], [3]]")), Error);
}

TEST(Json, CollapseRecordReplays) {
  TensorSpace sp("q", 3);
  StateVector psi(sp, {0.6, 0.0, 0.8});
  auto basis = computational_basis(sp);
  auto rec = collapse(psi, basis, 4242);
  auto back = io::collapse_record_from_json(io::json::parse(io::to_json(rec).dump()));
  EXPECT_EQ(back.rng_seed, 4242u);
  auto replay = collapse(back.pre_state, basis, back.rng_seed);
  EXPECT_EQ(replay.outcome_index, rec.outcome_index);
  EXPECT_EQ(back.post_state, rec.post_state);
}

TEST(Json, SchmidtCarriesBothBases) {
  StateVector bell(TensorSpace({{"a", 2}, {"b", 2}}), {std::sqrt(0.5), 0, 0, std::sqrt(0.5)});
  auto j = io::to_json(schmidt_decompose(bell, {"a"}));
  EXPECT_EQ(j["coefficients"].size(), 2u);
  EXPECT_EQ(j["system_vectors"].size(), 2u);
  EXPECT_EQ(j["environment_vectors"].size(), 2u);
  EXPECT_TRUE(j["degenerate"].get<bool>());
}

TEST(Csv, LedgerColumns) {
  std::vector<Real> p{0.5, 0.5};
  std::ostringstream os;
  io::write_ledger_csv(os, classical_ledger(p));
  std::istringstream is(os.str());
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  EXPECT_EQ(header.substr(0, 42), "step,S_ensemble_nats,S_physical_nats,I_nat");
  EXPECT_EQ(first.substr(0, 28), "initial,0.69314718055994529,");
  int lines = 0;
  for (std::string l; std::getline(is, l);) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST(Wigner, BinaryDumpRoundTrip) {
  PositionGrid grid{-8, 8, 64};
  auto st = GridState::from_wavefunction(grid, sample_wavefunction(grid, [](Real q) { return Complex(std::exp(-q * q / 2)); }));
  auto w = wigner_transform(st);
  std::stringstream ss;
  io::write_wigner_binary(ss, w);
  auto back = io::read_wigner_binary(ss);
  EXPECT_EQ(back.header["format"], "decolab.wigner.v1");
  EXPECT_EQ(back.header["n_q"], 64);
  EXPECT_TRUE((back.values.array() == w.values.array()).all());
  std::stringstream truncated(ss.str().substr(0, 200));
  EXPECT_THROW(io::read_wigner_binary(truncated), Error);
}

TEST(Wigner, CsvIsLongFormat) {
  PositionGrid grid{-8, 8, 32};
  auto st = GridState::from_wavefunction(grid, sample_wavefunction(grid, [](Real q) { return Complex(std::exp(-q * q / 2)); }));
  std::ostringstream os;
  io::write_wigner_csv(os, wigner_transform(st));
  std::string text = os.str();
  EXPECT_EQ(text.rfind("q,p,W\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 32 * 32 + 1);
}

TEST(Csv, EntropySeries) {
  std::ostringstream os;
  io::write_entropy_series_csv(os, {{0.0, 0.0, 0.0}, {1.0, 0.5, std::log(2.0)}});
  EXPECT_NE(os.str().find("1,0.5,0.69314718055994529,1\n"), std::string::npos);
}
