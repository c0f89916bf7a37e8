use anyprop_core::motion::{ConfidenceMap, FlowField};
use anyprop_core::warp::{
    backward_warp, refine, softmax_splat_with, splat_gradients, splat_sum_with, warp_domain_with, FeatureMap,
    Semantics, WarpMode,
};
use anyprop_core::Exec;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Instance {
    payload: FeatureMap,
    flow: FlowField,
    conf: ConfidenceMap,
}

fn instance(max_side: usize, max_flow: f64) -> impl Strategy<Value = Instance> {
    (1usize..=max_side, 1usize..=max_side, 1usize..=3).prop_flat_map(move |(h, w, c)| {
        let n = h * w;
        (
            prop::collection::vec(-10.0f64..10.0, c * n),
            prop::collection::vec(-max_flow..max_flow, n),
            prop::collection::vec(-max_flow..max_flow, n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(move |(p, u, v, s)| Instance {
                payload: FeatureMap::new(p, c, h, w, 0, Semantics::Generic).unwrap(),
                flow: FlowField::new(u, v, h, w).unwrap(),
                conf: ConfidenceMap::new(s, h, w).unwrap(),
            })
    })
}

/// Denominator by visiting every (source, target) pair.
fn brute_denominator(flow: &FlowField, weight: &[f64]) -> Vec<f64> {
    let (h, w) = flow.dims();
    let mut den = vec![0.0; h * w];
    for (q, wq) in weight.iter().enumerate() {
        let fx = (q % w) as f64 + flow.u[q];
        let fy = (q / w) as f64 + flow.v[q];
        for (t, d) in den.iter_mut().enumerate() {
            let kx = (1.0 - (fx - (t % w) as f64).abs()).max(0.0);
            let ky = (1.0 - (fy - (t / w) as f64).abs()).max(0.0);
            let k = kx * ky;
            if k != 0.0 {
                *d += wq * k;
            }
        }
    }
    den
}

fn shifted(conf: &ConfidenceMap, c: f64) -> ConfidenceMap {
    let (h, w) = conf.dims();
    ConfidenceMap::new(conf.s.iter().map(|s| s + c).collect(), h, w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn output_is_invariant_to_confidence_offset(inst in instance(8, 3.0)) {
        let base = softmax_splat_with(Exec::Sequential, &inst.payload, &inst.flow, &inst.conf).unwrap();
        for c in [-50.0, -1.0, 0.0, 1.0, 50.0] {
            let r = softmax_splat_with(Exec::Sequential, &inst.payload, &inst.flow, &shifted(&inst.conf, c)).unwrap();
            prop_assert_eq!(&r.coverage, &base.coverage);
            for (a, b) in r.output.data.iter().zip(&base.output.data) {
                prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "c={} {} vs {}", c, a, b);
            }
        }
    }

    #[test]
    fn zero_flow_is_exact_identity(inst in instance(8, 1.0)) {
        let (h, w) = inst.payload.dims();
        let r = softmax_splat_with(Exec::Sequential, &inst.payload, &FlowField::zeros(h, w), &inst.conf).unwrap();
        prop_assert_eq!(&r.output.data, &inst.payload.data);
        prop_assert!(r.coverage.iter().all(|&c| c));
    }

    #[test]
    fn output_is_a_convex_combination(inst in instance(8, 3.0)) {
        let r = softmax_splat_with(Exec::Sequential, &inst.payload, &inst.flow, &inst.conf).unwrap();
        let n = inst.payload.plane_len();
        for c in 0..inst.payload.channels {
            let plane = inst.payload.plane(c);
            let lo = plane.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..n {
                let o = r.output.data[c * n + i];
                prop_assert!(o >= lo - 1e-6 && o <= hi + 1e-6, "{} outside [{}, {}]", o, lo, hi);
            }
        }
    }

    #[test]
    fn denominator_matches_brute_force(inst in instance(8, 3.0)) {
        let weight: Vec<f64> = {
            let m = inst.conf.s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            inst.conf.s.iter().map(|s| (s - m).exp()).collect()
        };
        let r = softmax_splat_with(Exec::Sequential, &inst.payload, &inst.flow, &inst.conf).unwrap();
        prop_assert_eq!(r.denominator, brute_denominator(&inst.flow, &weight));
    }

    #[test]
    fn parallel_matches_sequential_bitwise(inst in instance(12, 4.0)) {
        let a = softmax_splat_with(Exec::Sequential, &inst.payload, &inst.flow, &inst.conf).unwrap();
        let b = softmax_splat_with(Exec::Parallel(4), &inst.payload, &inst.flow, &inst.conf).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn integer_translation_moves_content(inst in instance(8, 1.0), dx in -3i32..=3, dy in -3i32..=3) {
        let (h, w) = inst.payload.dims();
        let flow = FlowField::uniform(h, w, dx as f64, dy as f64);
        let r = softmax_splat_with(Exec::Sequential, &inst.payload, &flow, &inst.conf).unwrap();
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let (tx, ty) = (x + dx, y + dy);
                if tx < 0 || ty < 0 || tx >= w as i32 || ty >= h as i32 {
                    continue;
                }
                for c in 0..inst.payload.channels {
                    prop_assert_eq!(
                        r.output.get(c, tx as usize, ty as usize),
                        inst.payload.get(c, x as usize, y as usize)
                    );
                }
            }
        }
    }

    #[test]
    fn splat_sum_is_linear_in_payload(inst in instance(6, 2.0), k in -3.0f64..3.0) {
        let w = vec![1.0; inst.payload.plane_len()];
        let (num, _) = splat_sum_with(Exec::Sequential, &inst.payload, &inst.flow, &w).unwrap();
        let mut scaled = inst.payload.clone();
        scaled.data.iter_mut().for_each(|v| *v *= k);
        let (num_k, _) = splat_sum_with(Exec::Sequential, &scaled, &inst.flow, &w).unwrap();
        for (a, b) in num.iter().zip(&num_k) {
            prop_assert!((a * k - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn zero_flow_backward_warp_is_identity(inst in instance(8, 1.0)) {
        let (h, w) = inst.payload.dims();
        prop_assert_eq!(backward_warp(&inst.payload, &FlowField::zeros(h, w)).unwrap().data, inst.payload.data.clone());
    }
}

/// Flow with every fractional part at least `gap` away from an integer.
fn safe_flow(raw: Vec<f64>, gap: f64) -> Vec<f64> {
    raw.into_iter()
        .map(|v| {
            let f = v - v.floor();
            if f < gap {
                v.floor() + gap
            } else if f > 1.0 - gap {
                v.floor() + 1.0 - gap
            } else {
                v
            }
        })
        .collect()
}

fn loss(p: &FeatureMap, f: &FlowField, s: &ConfidenceMap, up: &[f64]) -> f64 {
    let r = softmax_splat_with(Exec::Sequential, p, f, s).unwrap();
    r.output.data.iter().zip(up).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_gradients_match_finite_differences(
        p in prop::collection::vec(-2.0f64..2.0, 3 * 36),
        u in prop::collection::vec(-2.0f64..2.0, 36),
        v in prop::collection::vec(-2.0f64..2.0, 36),
        s in prop::collection::vec(-2.0f64..2.0, 36),
        up in prop::collection::vec(-1.0f64..1.0, 3 * 36),
    ) {
        let payload = FeatureMap::new(p, 3, 6, 6, 0, Semantics::Generic).unwrap();
        let flow = FlowField::new(safe_flow(u, 1e-2), safe_flow(v, 1e-2), 6, 6).unwrap();
        let conf = ConfidenceMap::new(s, 6, 6).unwrap();
        let g = splat_gradients(&payload, &flow, &conf, &up).unwrap();
        let h = 1e-4;
        let check = |fd: f64, an: f64, what: &str| -> Result<(), TestCaseError> {
            prop_assert!((fd - an).abs() <= 1e-4 * (1.0 + an.abs()), "{}: fd {} vs analytic {}", what, fd, an);
            Ok(())
        };
        for i in 0..payload.data.len() {
            let (mut a, mut b) = (payload.clone(), payload.clone());
            a.data[i] += h;
            b.data[i] -= h;
            check((loss(&a, &flow, &conf, &up) - loss(&b, &flow, &conf, &up)) / (2.0 * h), g.payload[i], "payload")?;
        }
        for q in 0..36 {
            let (mut a, mut b) = (conf.clone(), conf.clone());
            a.s[q] += h;
            b.s[q] -= h;
            check((loss(&payload, &flow, &a, &up) - loss(&payload, &flow, &b, &up)) / (2.0 * h), g.confidence[q], "S")?;
            let (mut a, mut b) = (flow.clone(), flow.clone());
            a.u[q] += h;
            b.u[q] -= h;
            check((loss(&payload, &a, &conf, &up) - loss(&payload, &b, &conf, &up)) / (2.0 * h), g.flow_u[q], "u")?;
            let (mut a, mut b) = (flow.clone(), flow.clone());
            a.v[q] += h;
            b.v[q] -= h;
            check((loss(&payload, &a, &conf, &up) - loss(&payload, &b, &conf, &up)) / (2.0 * h), g.flow_v[q], "v")?;
        }
    }
}

fn one_hot(labels: &[usize], classes: usize, h: usize, w: usize) -> FeatureMap {
    let n = h * w;
    let mut data = vec![0.0; classes * n];
    for (i, &l) in labels.iter().enumerate() {
        data[l * n + i] = 1.0;
    }
    FeatureMap::new(data, classes, h, w, 0, Semantics::ClassProb).unwrap()
}

proptest! {
    #[test]
    fn refine_keeps_distributions(labels in prop::collection::vec(0usize..4, 30), passes in 0usize..4) {
        let f = one_hot(&labels, 4, 5, 6);
        let r = refine(&f, passes);
        prop_assert!(r.max_distribution_error() <= 1e-9);
        prop_assert!(r.data.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn segmentation_warp_stays_one_hot(
        labels in prop::collection::vec(0usize..3, 36),
        u in prop::collection::vec(-2.0f64..2.0, 36),
        v in prop::collection::vec(-2.0f64..2.0, 36),
    ) {
        let f = one_hot(&labels, 3, 6, 6);
        let flow = FlowField::new(u, v, 6, 6).unwrap();
        let conf = ConfidenceMap::constant(6, 6, 0.0);
        let r = warp_domain_with(Exec::Sequential, WarpMode::Segmentation, &f, &flow, &conf).unwrap();
        for i in 0..36 {
            let px = r.output.pixel(i % 6, i / 6);
            prop_assert_eq!(px.iter().filter(|&&x| x == 1.0).count(), 1);
            prop_assert_eq!(px.iter().filter(|&&x| x == 0.0).count(), 2);
        }
    }
}
