use proptest::prelude::*;

use tweezer::eigen::{solve_sector, DavidsonOptions, ParityBasis};
use tweezer::grid::{make_grid, Exchange, Grid1D, Parity, SymmetryLabel};
use tweezer::potential::{build_pair_hamiltonian, build_single_hamiltonian, ChannelId, DeltaMode, WellConfig};
use tweezer::spectra::{
    find_crossings, localized_basis, onsite_energy, run_sweep, separation_grid, solve_lowest_pair, solve_single,
    spectrum_csv, Sector, SpectrumBranch, SweepOptions,
};
use tweezer::Error;

fn grid() -> Grid1D {
    make_grid(8.0, 81).unwrap()
}

#[test]
fn single_particle_levels_match_dense_diagonalization() {
    let cfg = WellConfig::default();
    let g = grid();
    for d in [0.0, 1.3, 4.0] {
        let dense = build_single_hamiltonian(&g, d, &cfg).unwrap().to_dense();
        let mut exact: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        exact.sort_by(f64::total_cmp);
        let ours = solve_single(&g, d, &cfg, 5).unwrap();
        for (k, e) in ours.iter().enumerate() {
            assert!((e.energy - exact[k]).abs() < 1e-9 * exact[k].abs(), "d={d} k={k}");
            assert!((e.state.norm_sq() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn interaction_energy_obeys_hellmann_feynman() {
    // dE/dg = <ψ| δ(x_a - x_b) |ψ> = Σ_i |ψ(x_i, x_i)|² dx on the grid.
    let g = make_grid(6.0, 49).unwrap();
    let dx = g.dx();
    let energy = |a: f64| {
        let cfg = WellConfig::default().with_uniform_scattering_length(a);
        let sol = solve_lowest_pair(&g, 0.0, ChannelId::C00, &cfg, 1, &DavidsonOptions::default()).unwrap();
        (cfg.coupling(ChannelId::C00), sol.energy(Sector::SE, 0), sol.wavefunction(Sector::SE, 0))
    };
    let (g0, _, psi) = energy(0.05);
    let contact: f64 = (0..g.n_points()).map(|i| psi.at(i, i).norm_sqr()).sum::<f64>() * dx;
    let h = 1e-4;
    let (gp, ep, _) = energy(0.05 + h);
    let (gm, em, _) = energy(0.05 - h);
    let slope = (ep - em) / (gp - gm);
    assert!(g0 > 0.0);
    assert!((slope - contact).abs() < 1e-5 * contact, "{slope} vs {contact}");
}

#[test]
fn repulsion_raises_and_attraction_lowers_symmetric_ground() {
    let g = make_grid(6.0, 49).unwrap();
    let e = |a: f64| {
        let cfg = WellConfig::default().with_uniform_scattering_length(a);
        solve_lowest_pair(&g, 0.0, ChannelId::C00, &cfg, 1, &DavidsonOptions::default()).unwrap().energy(Sector::SE, 0)
    };
    let (neg, zero, pos) = (e(-0.05), e(0.0), e(0.05));
    assert!(neg < zero && zero < pos);
}

#[test]
fn delta_regularizations_converge_together() {
    let ground = |n: usize, mode: DeltaMode| {
        let cfg = WellConfig { delta_mode: mode, ..WellConfig::default() };
        let g = make_grid(6.0, n).unwrap();
        solve_lowest_pair(&g, 0.0, ChannelId::C00, &cfg, 1, &DavidsonOptions::default()).unwrap().energy(Sector::SE, 0)
    };
    // The smeared contact only enters its first-order regime once 2dx is
    // well below the relative wavefunction width; coarser grids are erratic.
    let coarse = (ground(193, DeltaMode::Kronecker) - ground(193, DeltaMode::Gaussian)).abs();
    let fine = (ground(385, DeltaMode::Kronecker) - ground(385, DeltaMode::Gaussian)).abs();
    assert!(fine < 0.7 * coarse, "{coarse} -> {fine}");
}

#[test]
fn cold_start_does_not_settle_on_an_excited_state() {
    // Far apart on a coarse grid, two opposite-well excited products are
    // already exact eigenstates while the same-well guess lies above them.
    let g = make_grid(10.0, 61).unwrap();
    let h = build_pair_hamiltonian(&g, 8.0, ChannelId::C00, &WellConfig::default()).unwrap();
    let b = ParityBasis::new(&h.single).unwrap();
    let wide = DavidsonOptions { guard: 6, ..DavidsonOptions::default() };
    let reference = solve_sector(&h, &b, Exchange::Symmetric, Parity::Odd, 3, &[], &wide).unwrap()[0].energy;
    for guard in 0..4 {
        let o = DavidsonOptions { guard, ..DavidsonOptions::default() };
        let got = solve_sector(&h, &b, Exchange::Symmetric, Parity::Odd, 1, &[], &o).unwrap()[0].energy;
        assert!((got - reference).abs() < 1e-9, "guard {guard}: {got} vs {reference}");
    }
    let ds = separation_grid(0.0, 8.0, 0.5).unwrap();
    let opts = SweepOptions { chunk: 4, ..SweepOptions::default() };
    let sweep = run_sweep(&g, &ds, ChannelId::C00, &WellConfig::default(), &opts).unwrap();
    assert!(sweep.failures.is_empty(), "{:?}", sweep.failures);
}

#[test]
fn pair_labels_are_exact() {
    let cfg = WellConfig::default();
    let g = grid();
    let sol = solve_lowest_pair(&g, 1.0, ChannelId::C00, &cfg, 6, &DavidsonOptions::default()).unwrap();
    for p in sol.eigenpairs(6) {
        let ex = p.state.exchange_expectation();
        let par = p.state.parity_expectation();
        assert!((ex.abs() - 1.0).abs() < 1e-10 && (par.abs() - 1.0).abs() < 1e-10);
        assert_eq!(p.label, SymmetryLabel::classify(Some(ex), par));
    }
}

// Strong attraction squeezes the pair beyond the product-orbital reference,
// so the sign check stays in the weak-coupling regime.
#[test]
fn onsite_energy_follows_scattering_length() {
    let g = make_grid(11.0, 221).unwrap();
    let pos = onsite_energy(&g, ChannelId::C00, &WellConfig::default().with_uniform_scattering_length(0.02), 10.0).unwrap();
    let neg = onsite_energy(&g, ChannelId::C00, &WellConfig::default().with_uniform_scattering_length(-0.02), 10.0).unwrap();
    assert!(pos > 0.0 && neg < 0.0);
    assert!(matches!(
        onsite_energy(&g, ChannelId::C00, &WellConfig::default(), 4.0),
        Err(Error::InsufficientSeparation(_))
    ));
    assert!(localized_basis(&g, 4.0, &WellConfig::default()).is_err());
}

#[test]
fn sweep_rejects_bad_separations() {
    let cfg = WellConfig::default();
    let g = grid();
    let o = SweepOptions::default();
    assert!(run_sweep(&g, &[], ChannelId::C00, &cfg, &o).is_err());
    assert!(run_sweep(&g, &[1.0, 1.0], ChannelId::C00, &cfg, &o).is_err());
    assert!(matches!(run_sweep(&g, &[0.0, 9.0], ChannelId::C00, &cfg, &o), Err(Error::GridTooSmall { .. })));
}

#[test]
fn sweep_tracks_smoothly_on_a_short_range() {
    let cfg = WellConfig::default();
    let g = grid();
    let ds = separation_grid(0.0, 2.0, 0.25).unwrap();
    let sweep = run_sweep(&g, &ds, ChannelId::C00, &cfg, &SweepOptions::default()).unwrap();
    assert!(sweep.failures.is_empty(), "{:?}", sweep.failures);
    assert_eq!(sweep.branches.len(), 6);
    for b in &sweep.branches {
        assert_eq!(b.samples.len(), ds.len());
        assert!(b.min_overlap > 0.9);
    }
    let csv = spectrum_csv(&sweep.branches, &cfg);
    assert_eq!(csv.lines().count(), 1 + 6 * ds.len());
    assert!(csv.starts_with("d,channel,n,energy_hw0,exchange,parity\n0,c00,"));
}

fn synthetic(sector: Sector, f: impl Fn(f64) -> f64) -> SpectrumBranch {
    SpectrumBranch {
        channel: ChannelId::C00,
        n: 0,
        sector,
        label: sector.label(),
        samples: (0..=10).map(|k| k as f64 * 0.2).map(|d| (d, f(d))).collect(),
        min_overlap: 1.0,
        role: None,
    }
}

#[test]
fn crossings_only_between_exchange_classes() {
    let s = synthetic(Sector::SE, |d| d);
    let a = synthetic(Sector::AO, |_| 1.1);
    let s2 = synthetic(Sector::SO, |d| 2.0 - d);
    let found = find_crossings(&[s, a, s2], 1e-12);
    assert_eq!(found.len(), 2);
    assert!(found.iter().all(|c| c.antisymmetric == 1));
    assert!(found.iter().any(|c| c.symmetric == 0 && c.d_lo == 1.0 && (c.d_hi - 1.2).abs() < 1e-12));
    // Two symmetric branches crossing is not reported.
    let s = synthetic(Sector::SE, |d| d);
    let s2 = synthetic(Sector::SO, |d| 2.0 - d);
    assert!(find_crossings(&[s, s2], 1e-12).is_empty());
}

#[test]
fn separation_grid_edges() {
    assert_eq!(separation_grid(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(separation_grid(2.0, 2.0, 0.1).unwrap(), vec![2.0]);
    assert!(separation_grid(1.0, 0.0, 0.1).is_err());
    assert!(separation_grid(0.0, 1.0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn antisymmetric_levels_ignore_coupling(a in -0.3f64..0.3, d in 0.0f64..3.0) {
        let g = make_grid(7.5, 31).unwrap();
        let opts = DavidsonOptions::default();
        let free = solve_lowest_pair(&g, d, ChannelId::CPsiMinus, &WellConfig::default().with_uniform_scattering_length(0.0), 6, &opts).unwrap();
        let cfg = WellConfig::default().with_uniform_scattering_length(a);
        let coupled = solve_lowest_pair(&g, d, ChannelId::C00, &cfg, 6, &opts).unwrap();
        for sector in [Sector::AE, Sector::AO] {
            let k = free.sector(sector).count.min(coupled.sector(sector).count);
            for i in 0..k {
                prop_assert!((free.energy(sector, i) - coupled.energy(sector, i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_parity_matches_orbital_symmetry(d in 0.0f64..4.0) {
        let s = solve_single(&grid(), d, &WellConfig::default(), 4).unwrap();
        for (k, e) in s.iter().enumerate() {
            let want = if k % 2 == 0 { Parity::Even } else { Parity::Odd };
            prop_assert_eq!(e.label.parity, Some(want));
            prop_assert_eq!(e.label.exchange, None::<Exchange>);
        }
    }
}
