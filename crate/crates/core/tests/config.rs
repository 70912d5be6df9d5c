use idmk::config::*;
use idmk::futuresel::*;
use idmk::idm::*;

#[test]
fn empty_file_is_the_default() {
    let c = RunConfig::from_toml_str("").unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.window(), WindowSpec::default());
    assert_eq!(c.selector(), SelectorKind::Radius { r: 2.0, k: 1 });
    assert_eq!(c.layout().obs_dim, 4);
}

#[test]
fn defaults_survive_a_round_trip() {
    let c = RunConfig::default();
    let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
}

#[test]
fn unknown_keys_are_rejected_with_a_line() {
    let text = "[idm]\npast = 3\n\n[futuresel]\nstrategy = \"radius\"\nradius = 2.0\n";
    let err = RunConfig::from_toml_str(text).unwrap_err();
    let msg = err.to_string();
    assert!(err.is_usage());
    assert!(msg.contains(":6:"), "{msg}");
    assert!(msg.contains("radius"), "{msg}");
}

#[test]
fn semantic_errors_are_config_errors() {
    for text in [
        "[futuresel]\nstrategy = \"inner_outer\"\nr_in = 3.0\nr_out = 1.0\n",
        "[idm]\npast = 0\nfuture = 0\n",
        "[harness]\nn_seeds = 0\n",
        "[envsim]\nscenarios = [\"nowhere\"]\n",
        "[idm.train]\nlearning_rate = -1.0\n",
    ] {
        let err = RunConfig::from_toml_str(text).unwrap_err();
        assert!(err.is_usage(), "{text}: {err}");
    }
}

#[test]
fn hash_tracks_content_not_formatting() {
    let a = RunConfig::from_toml_str("[idm]\npast = 3\n").unwrap();
    let b = RunConfig::from_toml_str("# comment\n[idm]\n  past   =   3\n").unwrap();
    let c = RunConfig::from_toml_str("[idm]\npast = 4\n").unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn strategies_parse() {
    assert_eq!(
        "inner-outer".parse::<Strategy>().unwrap(),
        Strategy::InnerOuter
    );
    assert!("nearest".parse::<Strategy>().is_err());
    let c = RunConfig::from_toml_str("[futuresel]\nstrategy = \"static\"\nk = 10\n").unwrap();
    assert_eq!(c.selector(), SelectorKind::Static { k: 10 });
}
