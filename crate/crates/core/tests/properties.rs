use nalgebra::DMatrix;
use proptest::prelude::*;

use adaptive_neuro::integrator::{simulate, spike_times, InputSignal, ParameterSchedule, Plant, Pulse, SimulationOptions};
use adaptive_neuro::model::{gating_rhs, invariant_bounds, membrane_rhs, Model, NetworkSpec, Parametrization, SystemState, ThetaLayout};
use adaptive_neuro::observers::{symmetrize_p, SaturationBox};
use adaptive_neuro::presets;

const LAYOUTS: [ThetaLayout; 3] = [
    ThetaLayout::MaxConductances,
    ThetaLayout::InverseCapacitance,
    ThetaLayout::InverseCapacitanceWithReversal,
];

fn spec_of(hco: bool) -> NetworkSpec {
    if hco {
        presets::hco()
    } else {
        presets::hh()
    }
}

/// A state `(v, w, u)` for the network: voltages in the physiological range,
/// gates in `[0, 1]`, inputs in `[-20, 20]`.
fn state(n_v: usize, n_w: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-100.0..60.0f64, n_v),
        prop::collection::vec(0.0..=1.0f64, n_w),
        prop::collection::vec(-20.0..20.0f64, n_v),
    )
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * (1.0 + x.abs().max(y.abs())))
}

fn check_regressor(hco: bool, (v, w, u): (Vec<f64>, Vec<f64>, Vec<f64>)) -> Result<(), TestCaseError> {
    let spec = spec_of(hco);
    let mut expected = vec![0.0; v.len()];
    membrane_rhs(&spec, &v, &w, &u, &mut expected);
    for layout in LAYOUTS {
        let model = Model::new(&spec, &Parametrization::new(layout)).unwrap();
        let mut got = vec![0.0; v.len()];
        model.output_rhs(&v, &w, &u, &model.theta_true(), &mut got);
        prop_assert!(close(&got, &expected, 1e-12), "{layout:?}: {got:?} vs {expected:?}");
    }
    Ok(())
}

fn check_internal(hco: bool, v: Vec<f64>, w: Vec<f64>) -> Result<(), TestCaseError> {
    let spec = spec_of(hco);
    let par = Parametrization::new(ThetaLayout::MaxConductances).with_eta(Parametrization::all_half_activations(&spec));
    let model = Model::new(&spec, &par).unwrap();
    prop_assert_eq!(model.n_drivers(), v.len());
    let mut expected = vec![0.0; w.len()];
    gating_rhs(&spec, &v, &w, &mut expected);
    let mut got = vec![0.0; w.len()];
    model.internal_rhs(&v, &model.eta_true(), &w, &mut got);
    prop_assert!(close(&got, &expected, 1e-12), "{got:?} vs {expected:?}");

    // every gate relaxes: the diagonal of A is strictly negative
    let (mut a, mut b) = (vec![0.0; w.len()], vec![0.0; w.len()]);
    model.internal(&v, &model.eta_true(), &mut a, &mut b);
    prop_assert!(a.iter().all(|&x| x < 0.0), "A diagonal {a:?}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regressor_form_matches_hh(s in state(1, 3)) {
        check_regressor(false, s)?;
    }

    #[test]
    fn regressor_form_matches_hco(s in state(2, 12)) {
        check_regressor(true, s)?;
    }

    #[test]
    fn internal_form_matches_hh((v, w, _) in state(1, 3)) {
        check_internal(false, v, w)?;
    }

    #[test]
    fn internal_form_matches_hco((v, w, _) in state(2, 12)) {
        check_internal(true, v, w)?;
    }

    #[test]
    fn regressor_is_linear_in_theta(
        (v, w, u) in state(1, 3),
        t1 in prop::collection::vec(-10.0..10.0f64, 4),
        t2 in prop::collection::vec(-10.0..10.0f64, 4),
        s in -3.0..3.0f64,
    ) {
        let model = Model::new(&presets::hh(), &Parametrization::new(ThetaLayout::InverseCapacitance)).unwrap();
        let eval = |th: &[f64]| {
            let mut o = [0.0];
            model.output_rhs(&v, &w, &u, th, &mut o);
            o[0]
        };
        let mixed: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a + s * b).collect();
        let zero = eval(&[0.0; 4]);
        let lhs = eval(&mixed) - zero;
        let rhs = (eval(&t1) - zero) + s * (eval(&t2) - zero);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn saturation_is_identity_inside_and_bounded_outside(
        lo in -5.0..5.0f64,
        width in 0.1..10.0f64,
        frac in 0.01..0.5f64,
        x in -50.0..50.0f64,
    ) {
        let hi = lo + width;
        let sat = SaturationBox::uniform(1, lo, hi, frac);
        let m = sat.margin[0];
        let (mut s, mut d) = ([0.0], [0.0]);
        sat.apply_with_derivative(&[x], &mut s, &mut d);
        if (lo..=hi).contains(&x) {
            prop_assert_eq!(s[0], x);
            prop_assert_eq!(d[0], 1.0);
        }
        prop_assert!(s[0] >= lo - m - 1e-12 && s[0] <= hi + m + 1e-12);
        prop_assert!((0.0..=1.0).contains(&d[0]));

        // monotone, and the derivative agrees with a central difference
        let h = 1e-6 * width;
        let (sp, sm) = (sat.saturate(&[x + h])[0], sat.saturate(&[x - h])[0]);
        prop_assert!(sp >= sm);
        prop_assert!(((sp - sm) / (2.0 * h) - d[0]).abs() < 1e-4);
    }

    #[test]
    fn symmetrize_gives_symmetric_idempotent_matrix(entries in prop::collection::vec(-1e3..1e3f64, 25)) {
        let p = DMatrix::from_row_slice(5, 5, &entries);
        let s = symmetrize_p(&p);
        prop_assert_eq!(&s, &s.transpose());
        prop_assert_eq!(&symmetrize_p(&s), &s);
        prop_assert!((s.trace() - p.trace()).abs() < 1e-9);
    }

    #[test]
    fn pulse_train_bound_covers_every_value(
        baseline in -5.0..5.0f64,
        pulses in prop::collection::vec((0.0..50.0f64, 0.1..20.0f64, -10.0..10.0f64), 0..6),
        t in -10.0..100.0f64,
    ) {
        let input = InputSignal::PulseTrain {
            baseline,
            pulses: pulses.into_iter().map(|(start_ms, width_ms, amplitude)| Pulse { start_ms, width_ms, amplitude }).collect(),
        };
        prop_assert!(input.value(t).abs() <= input.bound() + 1e-12);
    }

    #[test]
    fn spikes_respect_refractory_period(
        v in prop::collection::vec(-80.0..40.0f64, 10..400),
        refractory in 0.0..5.0f64,
    ) {
        let t: Vec<f64> = (0..v.len()).map(|k| 0.1 * k as f64).collect();
        let spikes = spike_times(&t, &v, 0.0, refractory);
        for pair in spikes.windows(2) {
            prop_assert!(pair[1] - pair[0] >= refractory - 1e-12);
        }
        for &s in &spikes {
            // each reported time sits on an upward crossing of the threshold
            let k = t.iter().position(|&x| x >= s - 1e-9).unwrap();
            prop_assert!(v[k] >= 0.0 && k > 0 && v[k - 1] < 0.0, "spike at {s}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hh_stays_in_invariant_box(
        amplitude in -30.0..30.0f64,
        period in 2.0..50.0f64,
        offset_frac in -1.0..1.0f64,
        v0 in 0.0..1.0f64,
        w0 in prop::collection::vec(0.0..=1.0f64, 3),
    ) {
        let spec = presets::hh();
        let u_bar = 30.0;
        let (v_lo, v_hi) = invariant_bounds(&spec, u_bar);
        let offset = offset_frac * (u_bar - amplitude.abs());
        let input = InputSignal::Sine { amplitude, period_ms: period, offset, delay_ms: 0.0 };
        prop_assert!(input.bound() <= u_bar + 1e-12);
        let mut plant = Plant::new(spec, vec![input], ParameterSchedule::default()).unwrap();
        let x0 = SystemState { v: vec![v_lo + v0 * (v_hi - v_lo)], w: w0 };
        let traj = simulate(&mut plant, &x0, None, &SimulationOptions::new(100.0, 0.01)).unwrap();
        prop_assert!(traj.v[0].iter().all(|&v| v >= v_lo - 1e-9 && v <= v_hi + 1e-9));
        prop_assert!(traj.w.iter().flatten().all(|&w| (-1e-9..=1.0 + 1e-9).contains(&w)));
    }
}
