//! Round trip through the long CSV format `t,i,j,value`: write a series
//! with gaps, read it back with zero filling, then standardize and
//! difference each cell.

use blin::io::{ingest_reader, IngestOptions};

const DATA: &str = "\
t,i,j,value
1990,USA,FRA,2.0
1990,USA,DEU,1.0
1990,GBR,FRA,0.5
1991,USA,FRA,3.0
1991,GBR,DEU,-1.0
1993,USA,FRA,1.5
1993,GBR,FRA,2.5
1993,USA,DEU,0.25
";

fn main() -> blin::Result<()> {
    let (raw, report) = ingest_reader(DATA.as_bytes(), &IngestOptions::default())?;
    println!("labels {:?}", report.labels);
    println!("times {:?}, {} records, {} cells zero-filled", report.times, report.records, report.filled);
    for t in 0..raw.horizon() {
        println!("t={} {:?}", report.times[t], raw.matrix(t).as_slice());
    }

    let opts = IngestOptions { standardize: true, difference: true, ..Default::default() };
    let (prepared, report) = ingest_reader(DATA.as_bytes(), &opts)?;
    println!("after {:?}: {} slices", report.transforms, prepared.horizon());
    for t in 0..prepared.horizon() {
        println!("  {:?}", prepared.matrix(t).as_slice().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    }
    Ok(())
}
