use std::sync::Arc;

use packhash_bench::{
    generate_corpus, run_bench, BenchConfig, CorpusFile, ScanContainer, SparseContainer,
};
use packhash_core::storage::{MemoryBackend, MeteredBackend, Phase};
use packhash_core::{Archive, ArchiveConfig, Backend, InputFile, ObjectPath};

fn setup() -> (Arc<MeteredBackend<MemoryBackend>>, ObjectPath) {
    (
        Arc::new(MeteredBackend::new(MemoryBackend::new())),
        ObjectPath::new("c").unwrap(),
    )
}

fn data_len(b: &MeteredBackend<MemoryBackend>) -> u64 {
    b.length(&ObjectPath::new("c/data").unwrap()).unwrap()
}

#[test]
fn scan_cost_grows_with_position() {
    let (b, root) = setup();
    let corpus = generate_corpus(500, 100..=3000, 1);
    let scan = ScanContainer::build(b.as_ref(), &root, &corpus).unwrap();
    let size = data_len(&b);

    b.meter().reset();
    assert_eq!(
        scan.get(b.as_ref(), &corpus[0].name).unwrap().unwrap(),
        corpus[0].content
    );
    assert_eq!(b.meter().phase(Phase::Metadata).read_ops, 2);
    assert_eq!(b.meter().phase(Phase::Content).read_ops, 1);

    b.meter().reset();
    let last = corpus.last().unwrap();
    assert_eq!(
        scan.get(b.as_ref(), &last.name).unwrap().unwrap(),
        last.content
    );
    assert_eq!(b.meter().phase(Phase::Content).read_bytes, size);

    b.meter().reset();
    assert_eq!(scan.get(b.as_ref(), "nope").unwrap(), None);
    assert_eq!(b.meter().phase(Phase::Content).read_bytes, size);
}

#[test]
fn sparse_scans_at_most_one_window() {
    let (b, root) = setup();
    let corpus = generate_corpus(1000, 10..=20, 2);
    let sparse = SparseContainer::build(b.as_ref(), &root, &corpus).unwrap();
    assert_eq!(sparse.sample_count(), 8);
    let window_bytes = 128 * (4 + corpus[0].name.len() as u64 + 8 + 20);

    for f in &corpus {
        b.meter().reset();
        assert_eq!(sparse.get(b.as_ref(), &f.name).unwrap().unwrap(), f.content);
        assert!(b.meter().total().read_bytes <= window_bytes, "{}", f.name);
    }
    // names sort as their indices; index 256 is a sample and sits at the window start
    b.meter().reset();
    sparse.get(b.as_ref(), &corpus[256].name).unwrap().unwrap();
    assert_eq!(b.meter().total().read_ops, 1);

    b.meter().reset();
    assert_eq!(sparse.get(b.as_ref(), "small/00000300.bin~").unwrap(), None);
    assert!(b.meter().total().read_bytes <= window_bytes);
    assert_eq!(sparse.get(b.as_ref(), "a-before-everything").unwrap(), None);

    let reopened = SparseContainer::open(b.as_ref(), &root).unwrap();
    assert_eq!(reopened.sample_count(), 8);
}

#[test]
fn all_strategies_return_identical_bytes() {
    let corpus: Vec<CorpusFile> = generate_corpus(300, 0..=2000, 3);
    let (hb, root) = setup();
    let dynb: Arc<dyn Backend> = hb.clone();
    let files = corpus
        .iter()
        .map(|f| InputFile::from_bytes(f.name.clone(), f.content.clone()))
        .collect();
    let cfg = ArchiveConfig {
        bucket_capacity: 32,
        ..Default::default()
    };
    let archive = Archive::create(dynb, &root, files, cfg).unwrap();
    let (sb, _) = setup();
    let sparse = SparseContainer::build(sb.as_ref(), &root, &corpus).unwrap();
    let (cb, _) = setup();
    let scan = ScanContainer::build(cb.as_ref(), &root, &corpus).unwrap();
    for f in &corpus {
        let a = archive.get_file(&f.name).unwrap();
        assert_eq!(a.as_deref(), Some(&f.content[..]));
        assert_eq!(sparse.get(sb.as_ref(), &f.name).unwrap(), a);
        assert_eq!(scan.get(cb.as_ref(), &f.name).unwrap(), a);
    }
}

#[test]
fn report_lines_are_tab_separated() {
    let cfg = BenchConfig {
        n: 300,
        sizes: 100..=1000,
        accesses: 20,
        ..Default::default()
    };
    let report = run_bench(&cfg).unwrap();
    let lines = report.machine_lines();
    for line in lines.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert!(["hpf", "sparse", "scan"].contains(&fields[0]));
        fields[2].parse::<f64>().unwrap();
    }
    let hpf = report.strategy("hpf").unwrap();
    assert_eq!(hpf.mean_read_ops(), 2.0);
    assert!(report.to_string().contains("strategy"));

    let pinned = run_bench(&BenchConfig { pin: true, ..cfg }).unwrap();
    let hpf = pinned.strategy("hpf").unwrap();
    assert_eq!(hpf.mean_read_ops(), 1.0);
    assert_eq!(hpf.metrics()[6], ("mean_cached_read_ops", 1.0));
}
