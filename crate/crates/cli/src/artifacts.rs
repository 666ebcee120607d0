//! File layout of a run directory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vrn_core::datagen::{read_qa, write_qa, write_types, DatasetSplit, QAItem};
use vrn_core::{load_graph, KnowledgeGraph, Vocabulary};

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

pub struct Layout {
    pub dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

impl Layout {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    pub fn create_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("cannot create {}", self.dir.display()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn qa(&self, split: &str, hops: usize) -> PathBuf {
        self.path(&format!("qa_{split}_{hops}hop.txt"))
    }

    pub fn qa_types(&self, split: &str, hops: usize) -> PathBuf {
        self.path(&format!("qa_types_{split}_{hops}hop.txt"))
    }

    /// Generating entity of every question, labeled or not; only used to
    /// measure the recognizer.
    pub fn qa_sources(&self, split: &str, hops: usize) -> PathBuf {
        self.path(&format!("qa_sources_{split}_{hops}hop.txt"))
    }

    pub fn checkpoint(&self, hops: usize, tag: &str) -> PathBuf {
        self.path(&format!("checkpoint_{hops}hop_{tag}.bin"))
    }

    pub fn write_graph(&self, g: &KnowledgeGraph) -> Result<()> {
        let mut w = create(&self.path("kg.tsv"))?;
        g.write_triples(&mut w)?;
        w.flush()?;
        let mut w = create(&self.path("entities.txt"))?;
        g.write_entities(&mut w)?;
        Ok(w.flush()?)
    }

    pub fn read_graph(&self) -> Result<KnowledgeGraph> {
        let entities = self.path("entities.txt");
        let entities = if entities.exists() { Some(open(&entities)?) } else { None };
        load_graph(open(&self.path("kg.tsv"))?, entities).context("kg.tsv")
    }

    pub fn write_vocab(&self, v: &Vocabulary) -> Result<()> {
        let mut w = create(&self.path("vocab.txt"))?;
        v.write(&mut w)?;
        Ok(w.flush()?)
    }

    pub fn read_vocab(&self) -> Result<Vocabulary> {
        Ok(Vocabulary::read(open(&self.path("vocab.txt"))?)?)
    }

    pub fn write_split(&self, g: &KnowledgeGraph, split: &DatasetSplit, hops: usize) -> Result<()> {
        for (name, items) in SPLITS.iter().zip([&split.train, &split.valid, &split.test]) {
            let mut w = create(&self.qa(name, hops))?;
            write_qa(items, g, &mut w)?;
            w.flush()?;
            let mut w = create(&self.qa_types(name, hops))?;
            write_types(items, &mut w)?;
            w.flush()?;
            let mut w = create(&self.qa_sources(name, hops))?;
            for it in items.iter() {
                writeln!(w, "{}", it.source.map_or("", |s| g.entity_name(s)))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn read_items(&self, g: &KnowledgeGraph, split: &str, hops: usize) -> Result<Vec<QAItem>> {
        let path = self.qa(split, hops);
        if !path.exists() {
            bail!("{} is missing; run gen-data with --hops {hops} first", path.display());
        }
        let types = self.qa_types(split, hops);
        let types = if types.exists() { Some(open(&types)?) } else { None };
        let mut items =
            read_qa(open(&path)?, types, g, hops).with_context(|| format!("reading {}", path.display()))?;
        let sources = self.qa_sources(split, hops);
        if sources.exists() {
            let names: Vec<String> = open(&sources)?.lines().collect::<std::io::Result<_>>()?;
            if names.len() != items.len() {
                bail!("{} has {} lines for {} questions", sources.display(), names.len(), items.len());
            }
            for (it, name) in items.iter_mut().zip(names) {
                if !name.is_empty() {
                    it.source = Some(
                        g.entity_by_name(&name)
                            .with_context(|| format!("{}: unknown entity `{name}`", sources.display()))?,
                    );
                }
            }
        }
        Ok(items)
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        create(&self.path(name))
    }
}
