//! Talks to an evaluator over the NDJSON protocol. Without arguments it
//! serves a surrogate on a local TCP port from a background thread;
//! otherwise the first argument is an address such as `cmd:python eval.py`.

use std::io::BufReader;
use std::net::TcpListener;

use rankprune::oracle::{
    serve, EvalRequest, ExternalOracle, Oracle, OracleAddress, SessionOptions, Split, SurrogateConfig,
};
use rankprune::Selection;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let address: OracleAddress = match std::env::args().nth(1) {
        Some(a) => a.parse()?,
        None => {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let port = listener.local_addr()?.port();
            std::thread::spawn(move || {
                let (stream, _) = listener.accept().expect("accept");
                let mut model = SurrogateConfig::default().build().expect("surrogate");
                let reader = BufReader::new(stream.try_clone().expect("clone"));
                serve(&mut model, reader, stream).expect("serve");
            });
            format!("tcp:127.0.0.1:{port}").parse()?
        }
    };
    let transcript = std::env::temp_dir().join("rankprune-transcript.jsonl");
    let _ = std::fs::remove_file(&transcript);
    let options = SessionOptions {
        record: Some(transcript.clone()),
        ..SessionOptions::default()
    };
    let mut oracle = ExternalOracle::open(&address, &options)?;
    println!("connected to {address}; pipelining: {}", oracle.pipelining());
    let profile = oracle.profile().clone();
    println!(
        "{} layers, {} channels",
        profile.layers().len(),
        profile.total_channels()
    );

    let all = Selection::keep_all(&profile);
    let requests = vec![
        EvalRequest::new(all.clone(), Split::Proxy, "all-proxy"),
        EvalRequest::new(all, Split::Heldout, "all-heldout"),
    ];
    for r in oracle.evaluate_batch(&requests)? {
        println!("{} ({}): {:.4}", r.tag, r.split, r.accuracy);
    }
    oracle.shutdown()?;
    println!("transcript: {}", transcript.display());
    Ok(())
}
