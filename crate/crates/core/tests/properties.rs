use std::f64::consts::PI;

use proptest::prelude::*;

use resonance_core::conditions::{ll_margin, ll_sc_bridge, pll_margin, DirectionSample, ResonantSpace};
use resonance_core::nonlinearity::{Builtin, Nonlinearity};
use resonance_core::quadrature::{QuadratureGrid, QuadratureSettings};
use resonance_core::solver::GalerkinProblem;
use resonance_core::spectral::{decompose, eigenpairs, max_modes, Domain, Part, DEFAULT_TIE_TOLERANCE};

fn builtin() -> impl Strategy<Value = Builtin> {
    prop_oneof![
        Just(Builtin::Arctan),
        (0.0..10.0f64).prop_map(|c| Builtin::ArctanCos { c }),
        Just(Builtin::VanishingLog),
        Just(Builtin::VanishingLogNegated),
        (0.0..5.0f64).prop_map(|c| Builtin::CauchyCos { c }),
        (0.0..3.0f64).prop_map(|c| Builtin::PaperExample { c }),
    ]
}

fn domain() -> impl Strategy<Value = Domain<f64>> {
    prop_oneof![
        (-2.0..2.0f64, 0.5..4.0f64).prop_map(|(a, len)| Domain::interval(a, a + len).unwrap()),
        (0.5..2.0f64, 0.5..2.0f64).prop_map(|(lx, ly)| Domain::rectangle(lx, ly).unwrap()),
        Just(Domain::rectangle(1.0, 1.0).unwrap()),
    ]
}

fn problem(domain: Domain<f64>, k: usize, n: usize, g: Builtin, forcing: Vec<f64>) -> Option<GalerkinProblem<f64>> {
    GalerkinProblem::new(domain, k, n, Nonlinearity::builtin(g), forcing, QuadratureSettings::default()).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antiderivative_differentiates_to_g(b in builtin(), s in -40.0..40.0f64) {
        let n = Nonlinearity::<f64>::builtin(b);
        let h = 1e-4;
        let fd = (n.antiderivative(s + h).unwrap() - n.antiderivative(s - h).unwrap()) / (2.0 * h);
        let g = n.g(s);
        // O(h²) truncation with |G'''| bounded by a few units for these families
        prop_assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()), "{b}: G' = {fd}, g = {g} at s = {s}");
        prop_assert!(n.antiderivative(0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn decomposition_partitions_ranks(d in domain(), k in 1usize..8, extra in 1usize..12) {
        let n = k + extra + 4;
        let pairs = eigenpairs(&d, n).unwrap();
        let Ok(dec) = decompose(&pairs, k, DEFAULT_TIE_TOLERANCE) else {
            // k inside a tie group or the group reaches N
            return Ok(());
        };
        let mut all: Vec<usize> = dec.hat().iter().chain(dec.bar()).chain(dec.tilde()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(dec.bar().len(), dec.multiplicity);
        prop_assert!(dec.bar().contains(&(k - 1)));
        let lk = dec.lambda_k();
        let scale = lk * DEFAULT_TIE_TOLERANCE;
        for i in 0..n {
            let l = pairs[i].eigenvalue;
            match dec.part_of(i) {
                Part::Hat => prop_assert!(l < lk - scale),
                Part::Bar => prop_assert!((l - lk).abs() <= scale),
                Part::Tilde => prop_assert!(l > lk + scale),
            }
        }
        prop_assert!(pairs.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
    }

    #[test]
    fn lemma_inequalities(d in domain(), k in 2usize..7, seed in prop::collection::vec(-1.0..1.0f64, 40)) {
        let n = 40;
        let pairs = eigenpairs(&d, n).unwrap();
        let Ok(dec) = decompose(&pairs, k, DEFAULT_TIE_TOLERANCE) else { return Ok(()); };
        let gaps = dec.gap_constants();
        let Some(c1) = gaps.c1 else { return Ok(()); };
        let lam = &dec.eigenvalues;
        let grad_sq = |a: &[f64]| a.iter().zip(lam).map(|(x, l)| l * x * x).sum::<f64>();
        let mut hat = vec![0.0; n];
        let mut tilde = vec![0.0; n];
        for &i in dec.hat() { hat[i] = seed[i]; }
        for &i in dec.tilde() { tilde[i] = seed[i]; }
        let (h, t) = (grad_sq(&hat), grad_sq(&tilde));
        prop_assert!(dec.quadratic_form(&hat) <= -c1 * h + 1e-12 * h.max(1.0));
        prop_assert!(dec.quadratic_form(&tilde) >= gaps.c3 * t - 1e-12 * t.max(1.0));
        let mut bar = vec![0.0; n];
        for &i in dec.bar() { bar[i] = seed[i]; }
        prop_assert!(dec.quadratic_form(&bar).abs() <= 1e-12 * grad_sq(&bar).max(1.0));
    }

    #[test]
    fn eigenfunctions_are_orthonormal(d in domain()) {
        let pairs = eigenpairs(&d, 12).unwrap();
        let grid = QuadratureGrid::for_modes(&d, max_modes(&pairs), &QuadratureSettings::default()).unwrap();
        for i in 0..pairs.len() {
            for j in i..pairs.len() {
                let ip = grid.integrate(|p| pairs[i].value(p) * pairs[j].value(p)).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - want).abs() < 1e-10, "<phi_{}, phi_{}> = {ip}", i + 1, j + 1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_split_reconstructs_energy(
        b in builtin(),
        k in 1usize..4,
        a in prop::collection::vec(-2.0..2.0f64, 12),
        f in prop::collection::vec(-1.0..1.0f64, 12),
    ) {
        let Some(p) = problem(Domain::interval(0.0, PI).unwrap(), k, 12, b, f) else { return Ok(()); };
        let e = p.energy(&a).unwrap();
        let s = p.energy_split(&a).unwrap();
        prop_assert!((s.a + s.b + s.c - s.d - s.total).abs() <= 1e-12 * (1.0 + s.total.abs()));
        prop_assert!((s.total - e).abs() <= 1e-10 * (1.0 + e.abs()), "split {} vs energy {e}", s.total);
        prop_assert!(s.a <= 0.0 && s.b >= 0.0);
    }

    #[test]
    fn linear_term_scales_with_forcing(
        b in builtin(),
        scale in -3.0..3.0f64,
        a in prop::collection::vec(-2.0..2.0f64, 10),
        f in prop::collection::vec(-1.0..1.0f64, 10),
    ) {
        let d = Domain::interval(0.0, PI).unwrap();
        let zero = problem(d, 2, 10, b, vec![0.0; 10]).unwrap();
        let scaled = problem(d, 2, 10, b, f.iter().map(|x| scale * x).collect()).unwrap();
        let lin: f64 = f.iter().zip(&a).map(|(x, y)| x * y).sum();
        let e0 = zero.energy(&a).unwrap();
        let es = scaled.energy(&a).unwrap();
        prop_assert!((es - (e0 - scale * lin)).abs() <= 1e-12 * (1.0 + e0.abs() + lin.abs()));
        let g0 = zero.gradient(&a).unwrap();
        let gs = scaled.gradient(&a).unwrap();
        for i in 0..10 {
            prop_assert!((gs[i] - (g0[i] - scale * f[i])).abs() <= 1e-12 * (1.0 + g0[i].abs()));
        }
    }

    #[test]
    fn antipodal_directions_swap_parts(
        f_bar in prop::collection::vec(-2.0..2.0f64, 2),
        dir in prop::collection::vec(-1.0..1.0f64, 2),
        limits in (0.1..3.0f64, -3.0..-0.1f64),
    ) {
        let d = Domain::rectangle(1.0, 1.0).unwrap();
        let pairs = eigenpairs(&d, 6).unwrap();
        let dec = decompose(&pairs, 2, DEFAULT_TIE_TOLERANCE).unwrap();
        let grid = QuadratureGrid::for_modes(&d, max_modes(&pairs), &QuadratureSettings::default()).unwrap();
        let mut forcing = vec![0.0; 6];
        forcing[1] = f_bar[0];
        forcing[2] = f_bar[1];
        let space = ResonantSpace::new(&pairs, &dec, &forcing, grid);
        let Some(phi) = DirectionSample::new(dir) else { return Ok(()); };
        let p = space.integrals(&phi);
        let q = space.integrals(&phi.negated());
        let tol = 1e-12 * (1.0 + p.abs_mass() + p.f_pos.abs() + p.f_neg.abs());
        prop_assert!((p.pos_mass - q.neg_mass).abs() <= tol);
        prop_assert!((p.neg_mass - q.pos_mass).abs() <= tol);
        prop_assert!((p.f_pos - q.f_neg).abs() <= tol);
        prop_assert!((p.f_neg - q.f_pos).abs() <= tol);
        // ∫f̄φ = f̄·φ in coefficients
        let dot = f_bar[0] * phi.coefficients[0] + f_bar[1] * phi.coefficients[1];
        prop_assert!((p.f_pos - p.f_neg - dot).abs() <= 1e-10);
        let m = ll_margin(limits, &p);
        prop_assert_eq!(m, ll_sc_bridge(limits, &p));
        prop_assert_eq!(m, pll_margin(limits, &p));
        // with f̄ = 0 the margin is g₊∫φ⁺ − g₋∫φ⁻ > 0 for g₊ > 0 > g₋
        let bare = resonance_core::conditions::DirectionIntegrals { f_pos: 0.0, f_neg: 0.0, ..p };
        prop_assert!(ll_margin(limits, &bare) > 0.0);
        prop_assert!((ll_margin(limits, &bare) - m - dot).abs() <= 1e-10);
    }
}
