//! Hand-written fixture sources, embedded at build time.

pub(super) struct BundleSource {
    pub name: &'static str,
    /// Files relative to the bundle directory, `target.s` first.
    pub files: &'static [(&'static str, &'static str)],
}

macro_rules! bundle {
    ($name:literal, [$($file:literal),* $(,)?]) => {
        BundleSource {
            name: $name,
            files: &[
                ("target.s", include_str!(concat!("../../../../fixtures/", $name, "/target.s"))),
                ("seeds.json", include_str!(concat!("../../../../fixtures/", $name, "/seeds.json"))),
                $(($file, include_str!(concat!("../../../../fixtures/", $name, "/", $file))),)*
            ],
        }
    };
}

pub(super) const BUNDLES: &[BundleSource] = &[
    bundle!("mf04", ["ravens/mf04.raven", "ravens/mf04.json"]),
    bundle!(
        "overflow",
        [
            "ravens/ovf_rx.raven",
            "ravens/ovf_rx.json",
            "ravens_overbroad/ovf_loose.raven",
            "ravens_overbroad/ovf_loose.json",
        ]
    ),
    bundle!("exploit", ["ravens/frb_ovf1.raven", "ravens/frb_ovf1.json"]),
    bundle!("exploit_patched", ["ravens/frb_ovf1.raven", "ravens/frb_ovf1.json"]),
    bundle!(
        "shared_corruption",
        [
            "ravens/sc_name.raven",
            "ravens/sc_name.json",
            "ravens/sc_slot.raven",
            "ravens/sc_slot.json",
        ]
    ),
    bundle!("interrupt_timing", ["ravens/irq_ptr.raven", "ravens/irq_ptr.json"]),
    bundle!("magic_gate", ["ravens/magic_idx.raven", "ravens/magic_idx.json"]),
    bundle!("delay_loop", ["ravens/delay_lut.raven", "ravens/delay_lut.json"]),
    bundle!(
        "two_bug",
        [
            "ravens/packet.raven",
            "ravens/packet.json",
            "ravens/fp_tb3.raven",
            "ravens/fp_tb3.json",
            "campaign.json",
        ]
    ),
];
