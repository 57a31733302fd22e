#pragma once

#include "occlab/rule.hpp"

namespace occlab::models {

/// Domany-Kinzel automaton on the discrete torus of length n:
/// P_i(x) = (q2 - q1) x_i x_{i+1} + q1 (1 - x_i) x_{i+1}, x_{n+1} = x_1.
struct DomanyKinzel
{
    std::size_t n = 3;
    double q1 = 0.0;
    double q2 = 0.0;
    double p0 = 0.5; ///< mean of the iid start

    /// n >= 3 and 0 <= q1 <= q2 <= 1 (the survival factor q2 - q1 is a
    /// probability only then), p0 in [0,1].
    void validate() const;
};

/// The torus update itself (time-homogeneous, analytic split).
RulePtr dk_rule(const DomanyKinzel &model);

/// dk_rule preceded by a constant step P_{i,0} = p0, so that X_1 is iid
/// Bernoulli(p0); two automaton steps later is t = 3 on this clock.
RulePtr dk_iid_rule(const DomanyKinzel &model);

/// E<zeta_2,h> as printed for the automaton:
/// n^{1/2} hbar (q2 - 2 q1)^2 p0^2 (1 - p0)(q1 + q2 - 2 p0 q1).
double dk_exact_mean_zeta2(const DomanyKinzel &model, const Vector &h);

/// The same expectation worked out directly from the update rule:
/// n^{1/2} hbar (q2 - 2 q1)^2 p0^2 (1 - p0)(q1 + p0 q2 - 2 p0 q1).
double dk_derived_mean_zeta2(const DomanyKinzel &model, const Vector &h);

} // namespace occlab::models
