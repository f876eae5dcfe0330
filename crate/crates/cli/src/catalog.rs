//! Static listings for `list-models` and `list-experiments`.

pub struct Entry {
    pub name: &'static str,
    pub tags: &'static str,
    pub about: &'static str,
}

pub const MODELS: [Entry; 4] = [
    Entry {
        name: "circle",
        tags: "periodic, no potential",
        about: "second-difference Laplacian on the circle of length 2 pi; keys: n",
    },
    Entry {
        name: "dirichlet",
        tags: "interval, potential",
        about: "-u'' + W u with zero boundary values; keys: n, interval, potential",
    },
    Entry {
        name: "divergence",
        tags: "interval, variable coefficient",
        about: "-(c u')' with zero boundary values; keys: n, interval, coefficient",
    },
    Entry {
        name: "oscillator",
        tags: "whole line, potential x^2",
        about: "-u'' + x^2 u in its first Hermite modes; keys: modes",
    },
];

pub const EXPERIMENTS: [Entry; 10] = [
    Entry {
        name: "bernstein",
        tags: "B_p",
        about: "max of (|Du|_p + |sqrt(W) u|_p) / (lambda_N |u|_p) on the band [0, N]",
    },
    Entry {
        name: "equivalence",
        tags: "psi-equiv",
        about: "two profiles scanned side by side over h",
    },
    Entry {
        name: "holomorphic",
        tags: "holo",
        about: "q to q norm of exp(-z L) along the ray z = t e^(i theta)",
    },
    Entry {
        name: "kernel-audit",
        tags: "G",
        about: "Gaussian, Grigor'yan and on-diagonal fits of the heat kernel",
    },
    Entry {
        name: "lplq",
        tags: "LpLq",
        about: "L^p to L^q band maxima and their growth in lambda_N",
    },
    Entry {
        name: "multiplier-uniformity",
        tags: "mult",
        about: "q to q norm of psi(h L) over h",
    },
    Entry {
        name: "regularity",
        tags: "R_p",
        about: "sqrt(t) (|D exp(-tL)|_p + |sqrt(W) exp(-tL)|_p) over t",
    },
    Entry {
        name: "reverse",
        tags: "RB_q",
        about: "max of lambda_N |u|_q / (|Du|_q + |sqrt(W) u|_q) on the band [N, K]",
    },
    Entry {
        name: "semiclassical",
        tags: "SB_p",
        about: "sqrt(h) (|D psi(hL)|_p + |sqrt(W) psi(hL)|_p) over h",
    },
    Entry {
        name: "semiclassical-reverse",
        tags: "SRB_q",
        about: "|psi(hL) u|_q against sqrt(h) (|Du|_q + |sqrt(W) u|_q) over h",
    },
];

pub fn render(entries: &[Entry]) -> String {
    let w = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let t = entries.iter().map(|e| e.tags.len()).max().unwrap_or(0);
    entries
        .iter()
        .map(|e| format!("{:w$}  [{:t$}]  {}\n", e.name, e.tags, e.about))
        .collect()
}
