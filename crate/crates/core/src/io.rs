//! CSV emission. Floats carry 17 significant digits; lines end in LF.

use std::io::{self, Write};

use crate::bilayer::BilayerState;
use crate::curve::EnergyCurve;
use crate::hamiltonian::LatticeState;
use crate::spectral::BandData;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_butterfly_csv<W: Write>(data: &[BandData], mut out: W) -> io::Result<()> {
    writeln!(out, "p,q,alpha,band_index,emin,emax")?;
    for d in data {
        for (b, band) in d.bands.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                d.p,
                d.q,
                fmt_f64(d.alpha()),
                b,
                fmt_f64(band.emin),
                fmt_f64(band.emax)
            )?;
        }
    }
    Ok(())
}

/// Raw Bloch eigenvalues: `k1,k2,band_index,energy`.
pub fn write_band_samples_csv<W: Write>(data: &BandData, mut out: W) -> io::Result<()> {
    writeln!(out, "k1,k2,band_index,energy")?;
    let tau = std::f64::consts::TAU;
    for k in 0..data.m1 * data.m2 {
        let k1 = tau * (k / data.m2) as f64 / data.m1 as f64;
        let k2 = tau * (k % data.m2) as f64 / data.m2 as f64;
        for (b, s) in data.samples.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(k1),
                fmt_f64(k2),
                b,
                fmt_f64(s[k])
            )?;
        }
    }
    Ok(())
}

/// `n1,n2,sublattice,re,im` in region enumeration order.
pub fn write_state_csv<W: Write>(state: &LatticeState, mut out: W) -> io::Result<()> {
    writeln!(out, "n1,n2,sublattice,re,im")?;
    for (s, a) in state.region().sites().iter().zip(state.amplitudes()) {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.n1,
            s.n2,
            s.sub.label(),
            fmt_f64(a.re),
            fmt_f64(a.im)
        )?;
    }
    Ok(())
}

/// `layer,n1,n2,sublattice,re,im`; layer 1 first.
pub fn write_bilayer_csv<W: Write>(state: &BilayerState, mut out: W) -> io::Result<()> {
    writeln!(out, "layer,n1,n2,sublattice,re,im")?;
    for (l, layer) in state.layers.iter().enumerate() {
        for (s, a) in layer.region().sites().iter().zip(layer.amplitudes()) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                l + 1,
                s.n1,
                s.n2,
                s.sub.label(),
                fmt_f64(a.re),
                fmt_f64(a.im)
            )?;
        }
    }
    Ok(())
}

pub fn write_curve_csv<W: Write>(curve: &EnergyCurve, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "phi,E,secular_residual,state_residual,gamma,embedded_flag"
    )?;
    for s in &curve.samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(s.phi),
            fmt_f64(s.energy),
            fmt_f64(s.secular_residual),
            fmt_f64(s.state_residual),
            fmt_f64(s.gamma),
            s.embedded as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Flux;
    use crate::lattice::{Region, Site};
    use crate::linalg::C64;
    use std::sync::Arc;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, -3.0, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn butterfly_rows() {
        let b = crate::spectral::band_structure(Flux::Rational { p: 1, q: 2 }, 4, 4).unwrap();
        let mut out = Vec::new();
        write_butterfly_csv(&[b], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p,q,alpha,band_index,emin,emax");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,2,5.0000000000000000e-1,0,"));
    }

    #[test]
    fn state_rows_follow_enumeration() {
        let region = Arc::new(Region::ball(Site::a(0, 0), 1).unwrap());
        let mut u = LatticeState::zeros(region.clone());
        u.amplitudes_mut()[0] = C64::new(0.5, -0.25);
        let mut out = Vec::new();
        write_state_csv(&u, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        let first = region.site(0);
        assert_eq!(
            lines[1],
            format!(
                "{},{},{},5.0000000000000000e-1,-2.5000000000000000e-1",
                first.n1,
                first.n2,
                first.sub.label()
            )
        );
        let mut out = Vec::new();
        write_bilayer_csv(
            &BilayerState::from_hybrid([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &u),
            &mut out,
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().nth(5).unwrap().starts_with("2,"));
    }
}
