"""attmarl: multi-agent deterministic-policy-gradient training with an
attention-based centralized critic, packet-routing and particle-world
benchmark environments, rule-based baselines, and an experiment harness."""

__version__ = "0.1.0"
