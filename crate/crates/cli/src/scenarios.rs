//! Scenarios shipped with the binary (`mpov run --scenario NAME`).

pub const BUNDLED: &[(&str, &str)] = &[
    ("fig1_mpov_gallery", include_str!("../scenarios/fig1_mpov_gallery.toml")),
    ("fig3_pov_l0_l5", include_str!("../scenarios/fig3_pov_l0_l5.toml")),
    ("fig4_profiles", include_str!("../scenarios/fig4_profiles.toml")),
    ("fig5_double_ring", include_str!("../scenarios/fig5_double_ring.toml")),
    ("fig6_triple_ring", include_str!("../scenarios/fig6_triple_ring.toml")),
    ("appA_interferograms", include_str!("../scenarios/appA_interferograms.toml")),
    ("appB_dfit", include_str!("../scenarios/appB_dfit.toml")),
    ("appC_demux_oam", include_str!("../scenarios/appC_demux_oam.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
