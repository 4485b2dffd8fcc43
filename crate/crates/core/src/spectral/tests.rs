use std::f64::consts::PI;

use super::*;
use crate::opsym::{make_operator, OperatorSpec};

fn op(tag: &str, d: usize, m: Option<usize>) -> DiffOp {
    make_operator(&OperatorSpec::builtin(tag, d, m)).unwrap()
}

#[test]
fn even_grid_is_rejected() {
    let err = Grid::new(2, 16).unwrap_err();
    assert!(err.to_string().contains("n must be odd"));
    assert!(Grid::new(4, 5).is_err());
}

#[test]
fn frequency_indexing_round_trips() {
    let g = Grid::new(3, 7).unwrap();
    for idx in 0..g.len() {
        assert_eq!(g.index_of(&g.freq(idx)), idx);
        assert_eq!(g.neg_index(g.neg_index(idx)), idx);
        assert!(g.freq(idx).iter().all(|k| k.unsigned_abs() <= 3));
    }
    let half = (0..g.len()).filter(|&i| g.is_half_space(i)).count();
    assert_eq!(half, (g.len() - 1) / 2);
}

#[test]
fn constant_field_has_only_zero_mode() {
    let g = Grid::new(2, 5).unwrap();
    let f = PeriodicField::from_fn(g, 2, |_, out| out.copy_from_slice(&[3.0, -1.5]));
    let s = transform(&f).unwrap();
    assert!((s.at(0)[0] - C64::new(3.0, 0.0)).norm() < 1e-14);
    assert!((s.at(0)[1] - C64::new(-1.5, 0.0)).norm() < 1e-14);
    assert!(s.coeffs()[2..].iter().all(|c| c.norm() < 1e-14));
}

#[test]
fn cosine_has_half_coefficients() {
    let g = Grid::new(2, 9).unwrap();
    let f = PeriodicField::from_fn(g, 1, |x, out| out[0] = (2.0 * PI * x[0]).cos());
    let s = transform(&f).unwrap();
    for k in [1, -1] {
        let c = s.at(g.index_of(&[k, 0]))[0];
        assert!((c - C64::new(0.5, 0.0)).norm() < 1e-14);
    }
    assert!((s.energy() - 0.5).abs() < 1e-14);
}

#[test]
fn divergence_of_sine() {
    let g = Grid::new(3, 7).unwrap();
    let f = PeriodicField::from_fn(g, 3, |x, out| out[0] = (2.0 * PI * x[0]).sin());
    let div = apply_operator(&op("div", 3, None), &f).unwrap();
    assert_eq!(div.fiber(), 1);
    for p in 0..g.len() {
        let x = g.point(p);
        assert!((div.at(p)[0] - 2.0 * PI * (2.0 * PI * x[0]).cos()).abs() < 1e-11);
    }
}

#[test]
fn curl_of_gradient_vanishes() {
    let g = Grid::new(2, 11).unwrap();
    let phi = random_band_limited_field(g, 2, 4, 9, 1.0).unwrap();
    let grad = apply_operator(&op("grad", 2, Some(2)), &phi).unwrap();
    let curl = apply_operator(&op("curl", 2, Some(2)), &grad).unwrap();
    assert!(curl.l2_norm() <= 1e-10 * grad.l2_norm());
}

#[test]
fn wave_in_kernel_is_annihilated() {
    let g = Grid::new(2, 9).unwrap();
    let curl = op("curl", 2, Some(2));
    let (_, k) = opsym::wave_cone_sample(&curl, &[vec![1.0, 2.0]]).unwrap().remove(0);
    let lambda: Vec<f64> = k.column(0).iter().copied().collect();
    let f = PeriodicField::from_fn(g, 4, |x, out| {
        let c = (2.0 * PI * (x[0] + 2.0 * x[1])).cos();
        out.iter_mut().zip(&lambda).for_each(|(o, l)| *o = l * c);
    });
    assert!(apply_operator(&curl, &f).unwrap().l2_norm() < 1e-10);
}

#[test]
fn operator_dimension_mismatch() {
    let g = Grid::new(2, 5).unwrap();
    let f = PeriodicField::zeros(g, 3);
    assert!(matches!(
        apply_operator(&op("div", 2, Some(1)), &f),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn zero_mean_behaviour() {
    let g = Grid::new(1, 9).unwrap();
    let c = PeriodicField::from_fn(g, 1, |_, o| o[0] = 2.5);
    assert!(zero_mean(&c).sup_norm() < 1e-15);
    let f = random_band_limited_field(g, 1, 3, 1, 1.0).unwrap();
    let z = zero_mean(&f);
    assert!(z.sub(&f).unwrap().sup_norm() < 1e-15);
    let shifted = zero_mean(&f.shifted(&[4.0]).unwrap());
    assert!(shifted.sub(&z).unwrap().sup_norm() < 1e-14);
}

#[test]
fn single_mode_negative_norm() {
    let g = Grid::new(2, 9).unwrap();
    let lambda = [0.6, -0.8, 2.0];
    let f = PeriodicField::from_fn(g, 3, |x, out| {
        let c = (2.0 * PI * x[0]).cos();
        out.iter_mut().zip(lambda).for_each(|(o, l)| *o = l * c);
    });
    let norm_l = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
    let expected = norm_l / (2.0 * PI * 2.0_f64.sqrt());
    let n2 = sobolev_norm(&f, -1, 2.0).unwrap();
    assert!((n2 - expected).abs() < 1e-14);
    // Plancherel shortcut against the grid route
    let spec = transform(&f).unwrap().scale_modes(|i| sobolev_multiplier(g, i, -1));
    let grid_route = inverse_transform(&spec).l2_norm();
    assert!((grid_route - n2).abs() <= 1e-10 * n2);
    assert_eq!(sobolev_norm(&PeriodicField::zeros(g, 3), -1, 3.0).unwrap(), 0.0);
}

#[test]
fn negative_norm_requires_zero_mean() {
    let g = Grid::new(1, 5).unwrap();
    let c = PeriodicField::from_fn(g, 1, |_, o| o[0] = 1.0);
    assert!(matches!(sobolev_norm(&c, -1, 2.0), Err(Error::NonZeroMean(_))));
    assert!(sobolev_norm(&c, 0, 2.0).is_ok());
}

#[test]
fn v_energy_examples() {
    let g = Grid::new(2, 5).unwrap();
    assert_eq!(v_energy(&PeriodicField::zeros(g, 2), 4.0).unwrap(), 0.0);
    let unit = PeriodicField::from_fn(g, 2, |_, o| o.copy_from_slice(&[0.6, 0.8]));
    assert!((v_energy(&unit, 4.0).unwrap() - 2.0).abs() < 1e-14);
    let f = random_band_limited_field(g, 2, 2, 4, 1.3).unwrap();
    assert_eq!(v_energy(&f, 2.0).unwrap(), 2.0 * f.mean_square());
    assert!(v_energy(&f, 1.5).is_err());
}

#[test]
fn mixed_norm_examples() {
    let g = Grid::new(2, 9).unwrap();
    assert_eq!(mixed_negative_norm(&PeriodicField::zeros(g, 1), 3.0).unwrap(), 0.0);
    let f = random_band_limited_field(g, 2, 3, 5, 1.0).unwrap();
    let n2 = sobolev_norm(&f, -1, 2.0).unwrap();
    assert!((mixed_negative_norm(&f, 2.0).unwrap() - 2.0_f64.sqrt() * n2).abs() < 1e-15);
    let single = PeriodicField::from_fn(g, 1, |x, o| o[0] = 3.0 * (2.0 * PI * x[1]).cos());
    let a = 3.0 / (2.0 * PI * 2.0_f64.sqrt());
    let np = sobolev_norm(&single, -1, 4.0).unwrap();
    let m = mixed_negative_norm(&single, 4.0).unwrap();
    assert!((m - (a * a + np.powi(4)).sqrt()).abs() < 1e-14);
    // |cos|_{L^4} = (3/8)^{1/4}
    assert!((np - 3.0 / (2.0 * PI) * 0.375_f64.powf(0.25)).abs() < 1e-12);
}

#[test]
fn afree_fields_are_real_zero_mean_and_annihilated() {
    let g = Grid::new(2, 15).unwrap();
    let curl = op("curl", 2, Some(2));
    let f = random_afree_field(&curl, g, 5, 42, 2.0).unwrap();
    assert!((f.l2_norm() - 2.0).abs() < 1e-12);
    assert!(f.mean().iter().all(|m| m.abs() < 1e-14));
    assert!(apply_operator(&curl, &f).unwrap().l2_norm() <= 1e-10 * f.l2_norm());
    let spec = transform(&f).unwrap();
    for idx in 0..g.len() {
        if g.freq_inf(idx) > 5 {
            assert!(spec.at(idx).iter().all(|c| c.norm() < 1e-13));
        }
    }
    let again = random_afree_field(&curl, g, 5, 42, 2.0).unwrap();
    assert_eq!(f.data(), again.data());
    assert_ne!(f.data(), random_afree_field(&curl, g, 5, 43, 2.0).unwrap().data());
}

#[test]
fn elliptic_operator_has_no_afree_fields() {
    let g = Grid::new(2, 7).unwrap();
    let grad = op("grad", 2, Some(1));
    assert!(matches!(random_afree_field(&grad, g, 2, 0, 1.0), Err(Error::Elliptic)));
    assert!(random_afree_field(&op("div", 2, Some(1)), g, 0, 0, 1.0).is_err());
}

#[test]
fn field_file_round_trip() {
    let g = Grid::new(2, 5).unwrap();
    let f = random_band_limited_field(g, 3, 2, 8, 1.0).unwrap();
    let mut buf = Vec::new();
    io::write_samples(&mut buf, &f).unwrap();
    let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
    let header = std::str::from_utf8(&buf[..header_end]).unwrap();
    assert_eq!(
        header,
        r#"{"d":2,"n":5,"N":3,"layout":"row-major","kind":"samples"}"#
    );
    assert_eq!(io::read_field(&buf[..]).unwrap(), io::FieldData::Samples(f.clone()));

    let s = transform(&f).unwrap();
    let mut buf = Vec::new();
    io::write_coeffs(&mut buf, &s).unwrap();
    assert_eq!(io::read_field(&buf[..]).unwrap(), io::FieldData::Coeffs(s));
    assert!(io::read_field(&buf[..buf.len() - 3]).is_err());
}

#[test]
fn magnitude_csv_lists_every_mode() {
    let g = Grid::new(1, 5).unwrap();
    let f = PeriodicField::from_fn(g, 1, |x, o| o[0] = (2.0 * PI * x[0]).cos());
    let mut buf = Vec::new();
    io::write_magnitude_csv(&mut buf, &transform(&f).unwrap()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k1,magnitude");
    assert_eq!(lines.len(), 6);
    assert!(lines[2].starts_with("1,5e-1") || lines[2].starts_with("1,4.99999"));
}
