"""Figure rendering for run reports.

Figures are written next to the delimited outputs, non-interactively, with
the software tag stripped from the PNG metadata so re-runs are
byte-for-byte reproducible.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def _finish(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def trajectory_figure(rows, out_dir, name="trajectory.png"):
    """Mass budget and condensate growth over time.

    rows: list of dicts with keys t, mass_total, mass_condensate,
    energy_active, overflow_mass, overflow_energy.
    """
    if len(rows) < 2:
        return None
    t = [r["t"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    ax1.plot(t, [r["mass_total"] for r in rows], label="total mass")
    ax1.plot(t, [r["mass_condensate"] for r in rows], label="condensate")
    ax1.plot(t, [r["overflow_mass"] for r in rows], label="overflow")
    ax1.set_xlabel("t")
    ax1.set_ylabel("mass")
    ax1.legend(frameon=False, fontsize=8)
    ax2.plot(t, [r["energy_active"] for r in rows], label="active energy")
    ax2.plot(t, [r["energy_active"] + r["overflow_energy"] for r in rows],
             "--", label="active + overflow")
    ax2.set_xlabel("t")
    ax2.set_ylabel("energy")
    ax2.legend(frameon=False, fontsize=8)
    return _finish(fig, out_dir, name)


def measure_figure(mu, out_dir, name="profile.png", title=None):
    """Final measure: atom weights on a log size axis, condensate annotated."""
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    if mu.xs.size:
        ax.loglog(mu.xs, mu.ws, ".", markersize=3)
    ax.set_xlabel("x")
    ax.set_ylabel("weight")
    label = "condensate mass %.4g" % mu.condensate
    ax.text(0.02, 0.02, label, transform=ax.transAxes, fontsize=8)
    if title:
        ax.set_title(title, fontsize=9)
    return _finish(fig, out_dir, name)


def profile_figure(result, out_dir, name="profile.png"):
    """Converged self-similar profile: energy and mass densities."""
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    keep = result.psi > 0.0
    ax.loglog(result.nodes[keep], result.psi[keep], ".", markersize=3,
              label="energy weights")
    ax.loglog(result.nodes[keep], result.phi_w[keep], ".", markersize=3,
              label="mass weights")
    ax.set_xlabel("x")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("stationarity residual %.2e" % result.residual_psi_eps,
                 fontsize=9)
    return _finish(fig, out_dir, name)


def identity_figure(eps_ladder, values, target, out_dir,
                    name="identity.png"):
    """Regularized double integral against the cutoff, with the limit."""
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    ax.semilogx(eps_ladder, values, "o-", label="I(eps)")
    ax.axhline(target, linestyle="--", color="k", linewidth=0.8,
               label="pi^2/12")
    ax.set_xlabel("eps")
    ax.set_ylabel("value")
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, out_dir, name)
