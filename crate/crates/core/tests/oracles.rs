//! Functionals against naive re-implementations and hand-checkable inequalities.

use chemotax::functionals::{ckp_gap_single, lyapunov_f, lyapunov_h, rate_params_pp};
use chemotax::model::{build_gaussian_bump, build_random_perturbation, build_symmetric_copy, normalize};
use chemotax::regimes::check_b4;
use chemotax::{DerivedParams, Domain, DomainConstant, Field, ModelParams, SimState};

struct Naive<'a> {
    dom: &'a Domain<f64>,
}

impl Naive<'_> {
    fn get(&self, f: &Field<f64>, i: usize, j: usize) -> f64 {
        f.values()[j * self.dom.nx() + i]
    }

    fn dot(&self, f: &Field<f64>, g: &Field<f64>) -> f64 {
        let mut s = 0.0;
        for j in 0..self.dom.ny() {
            for i in 0..self.dom.nx() {
                s += self.get(f, i, j) * self.get(g, i, j) * self.dom.hx() * self.dom.hy();
            }
        }
        s
    }

    fn grad_dot(&self, f: &Field<f64>, g: &Field<f64>) -> f64 {
        let (hx, hy) = (self.dom.hx(), self.dom.hy());
        let mut s = 0.0;
        for j in 0..self.dom.ny() {
            for i in 0..self.dom.nx() {
                if i + 1 < self.dom.nx() {
                    let a = (self.get(f, i + 1, j) - self.get(f, i, j)) / hx;
                    let b = (self.get(g, i + 1, j) - self.get(g, i, j)) / hx;
                    s += a * b * hx * hy;
                }
                if j + 1 < self.dom.ny() {
                    let a = (self.get(f, i, j + 1) - self.get(f, i, j)) / hy;
                    let b = (self.get(g, i, j + 1) - self.get(g, i, j)) / hy;
                    s += a * b * hx * hy;
                }
            }
        }
        s
    }

    fn xlogx(&self, f: &Field<f64>) -> f64 {
        let mut s = 0.0;
        for j in 0..self.dom.ny() {
            for i in 0..self.dom.nx() {
                let x = self.get(f, i, j);
                s += x * x.ln() * self.dom.hx() * self.dom.hy();
            }
        }
        s
    }
}

fn random_state(dom: &Domain<f64>, seed: u64) -> SimState<f64> {
    let f = |k: u64, m: f64| build_random_perturbation(dom, m, 0.6, seed * 10 + k);
    SimState::new(f(0, 1.3), f(1, 0.7), f(2, 0.4), f(3, 2.1))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn f_matches_naive_formula() {
    let dom = Domain::new(1.5, 0.75, 12, 9).unwrap();
    let n = Naive { dom: &dom };
    for seed in 0..5 {
        let s = random_state(&dom, seed);
        let p = ModelParams::new(0.8, 1.7, 0.45, 1.0, 2.0).unwrap();
        let (c1, c2, c3) = (p.chi1, p.chi2, p.chi3);
        let expected = c2 * n.xlogx(&s.u) + c1 * n.xlogx(&s.w)
            - c1 * c2 * (n.dot(&s.u, &s.v) + n.dot(&s.w, &s.z))
            - c1 * c3 * n.dot(&s.w, &s.v)
            + c1 * c2 * (n.dot(&s.v, &s.z) + n.grad_dot(&s.v, &s.z))
            + 0.5 * c1 * c3 * (n.dot(&s.v, &s.v) + n.grad_dot(&s.v, &s.v));
        let got = lyapunov_f(&s, &p, &dom).unwrap();
        assert!(rel(got, expected) < 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn h_matches_naive_formula() {
    let dom = Domain::new(1.0, 1.0, 10, 10).unwrap();
    let n = Naive { dom: &dom };
    let p = ModelParams::new(1.0, 1.0, 0.0, 1.5, 0.5).unwrap();
    let s = random_state(&dom, 3);
    let k = 1.0;
    let dp = DerivedParams::from_masses(0.5, 0.5, &p, &dom).unwrap().with_k(DomainConstant::user(k));
    let rp = rate_params_pp(&dp, &p).unwrap().expect("admissible");
    let ns = normalize(&s, &dp, &p).unwrap();
    // mean-one densities so that ∫U ln U is the entropy term as written
    let (u, w) = (ns.u.scaled(1.0 / ns.u.mean()), ns.w.scaled(1.0 / ns.w.mean()));
    let ns = chemotax::NormalizedState { u: u.clone(), w: w.clone(), ..ns };
    let cv = 1.0 + 2.0 * rp.beta + rp.gamma1 / (k * dp.eta1);
    let cz = 1.0 + 2.0 * rp.beta + rp.gamma2 / (k * dp.eta2);
    let expected = rp.alpha / k * n.xlogx(&u)
        + p.tau1 * rp.alpha / 2.0 * n.grad_dot(&ns.v, &ns.v)
        + p.tau1 * rp.alpha / 2.0 * cv * n.dot(&ns.v, &ns.v)
        + n.xlogx(&w) / k
        + p.tau2 / 2.0 * n.grad_dot(&ns.z, &ns.z)
        + p.tau2 / 2.0 * cz * n.dot(&ns.z, &ns.z);
    let got = lyapunov_h(&ns, &dp, &rp, &p, &dom).unwrap();
    assert!(rel(got, expected) < 1e-12, "{got} vs {expected}");
}

#[test]
fn ckp_holds_on_random_mean_one_fields() {
    let dom = Domain::new(2.0, 1.0, 16, 8).unwrap();
    for seed in 0..100 {
        let f = build_random_perturbation(&dom, 1.0, 0.8, seed);
        let g = ckp_gap_single(&f, &dom).unwrap();
        assert!(g.lhs <= g.rhs, "seed {seed}: {} > {}", g.lhs, g.rhs);
    }
}

#[test]
fn ckp_two_valued_example() {
    let dom = Domain::<f64>::new(1.0, 1.0, 4, 4).unwrap();
    let f = Field::from_fn(&dom, |x, _| if x < 0.5 { 1.5 } else { 0.5 });
    let g = ckp_gap_single(&f, &dom).unwrap();
    assert!((g.lhs - 0.25).abs() < 1e-15);
    let rhs = 2.0 * (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln());
    assert!((g.rhs - rhs).abs() < 1e-14);
    assert!(g.lhs < g.rhs);
}

#[test]
fn symmetric_copy_lands_on_blowup_line() {
    let dom = Domain::unit_square(32).unwrap();
    let p = ModelParams::<f64>::elliptic(1.0, 2.0, 0.0).unwrap();
    let u = build_gaussian_bump(&dom, 5.0, (0.5, 0.5), 0.1, 1e-6).unwrap();
    let v = chemotax::solve_helmholtz(&u, 1.0, 1.0, &dom).unwrap();
    let (w, _) = build_symmetric_copy(&u, &v, &p).unwrap();
    let dp = DerivedParams::from_initial(&u, &w, &p, &dom).unwrap();
    assert!((dp.m2 - 10.0).abs() < 1e-12);
    assert!((dp.m1 * p.chi2 - dp.m2 * p.chi1).abs() < 1e-12);
    let (on_line, blowup_mass) = check_b4(&p, &dp, 1e-9);
    assert!(on_line);
    assert!(!blowup_mass, "5 * 10 * 2 = 100 < (4 pi)^2");
}
