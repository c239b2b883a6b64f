use txclass::corpus::generate_synthetic;
use txclass::pipeline::{classify_batch, load_bundle, read_bundle, save_bundle, write_bundle, FORMAT_VERSION, MAGIC};
use txclass::{train_pipeline, Config, Error, GazetteerConfig, ModelBundle, SynthConfig};

fn trained() -> (ModelBundle, Vec<u8>) {
    let data = generate_synthetic(&SynthConfig::reference(6, 0.3, 11)).unwrap();
    let (bundle, _) = train_pipeline(&data, &GazetteerConfig::default(), &Config::default()).unwrap();
    let mut bytes = Vec::new();
    write_bundle(&bundle, &mut bytes).unwrap();
    (bundle, bytes)
}

#[test]
fn round_trip_is_lossless() {
    let (bundle, bytes) = trained();
    assert_eq!(&bytes[..4], MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), FORMAT_VERSION);
    let back = read_bundle(&bytes).unwrap();
    assert_eq!(back, bundle);

    let mut again = Vec::new();
    write_bundle(&back, &mut again).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn file_round_trip_classifies_identically() {
    let (bundle, _) = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txm");
    save_bundle(&bundle, &path).unwrap();
    let loaded = load_bundle(&path).unwrap();
    let probes = generate_synthetic(&SynthConfig::reference(4, 0.0, 99)).unwrap();
    let g = GazetteerConfig::default();
    let a = classify_batch(&bundle, &g, &probes.records).unwrap();
    let b = classify_batch(&loaded, &g, &probes.records).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncation_is_corrupt() {
    let (_, bytes) = trained();
    for cut in [0, 3, 8, 11, 12, 40, bytes.len() / 2, bytes.len() - 33, bytes.len() - 1] {
        match read_bundle(&bytes[..cut]) {
            Err(Error::Corrupt(_)) => {}
            other => panic!("cut at {cut}: {:?}", other.map(|_| ())),
        }
    }
}

#[test]
fn flipped_byte_is_corrupt() {
    let (_, bytes) = trained();
    for at in [12, 20, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x40;
        assert!(matches!(read_bundle(&bad), Err(Error::Corrupt(_))), "byte {at}");
    }
}

#[test]
fn newer_version_is_rejected_before_checksum() {
    let (_, mut bytes) = trained();
    bytes[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    match read_bundle(&bytes) {
        Err(Error::Version { found, expected }) => {
            assert_eq!((found, expected), (FORMAT_VERSION + 1, FORMAT_VERSION));
        }
        other => panic!("{:?}", other.map(|_| ())),
    }
}

#[test]
fn wrong_magic_is_corrupt() {
    let (_, mut bytes) = trained();
    bytes[0] = b'X';
    assert!(matches!(read_bundle(&bytes), Err(Error::Corrupt(_))));
}

#[test]
fn gazetteer_mismatch_is_reported() {
    let (bundle, _) = trained();
    assert!(bundle.gazetteer_mismatches(&GazetteerConfig::default()).is_empty());
    let other = GazetteerConfig::from_lists("en\nde\n", "elvira\n");
    assert_eq!(bundle.gazetteer_mismatches(&other).len(), 2);
}
