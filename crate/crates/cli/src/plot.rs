//! Gnuplot scripts emitted next to each CSV.

const HEADER: &str = "set datafile separator ','\nset key top left\n";

pub fn script(command: &str, csv: &str) -> String {
    let body = match command {
        "kernel-check" => format!(
            "set style data histograms\nset logscale y\nset ylabel 'max residual'\nplot '{csv}' every ::1 using 3:xtic(1) title 'residual', '' every ::1 using 4 title 'tolerance'\n"
        ),
        "sample-prm" => format!("set xlabel 's'\nset ylabel 'y1'\nplot '{csv}' every ::1 using 1:2 with points pt 7 title 'events'\n"),
        "solve" => format!(
            "set xlabel 't'\nset ylabel 'x'\nset view map\nsplot '{csv}' every ::1 using 1:2:3 with points palette pt 5 title 'u(t,x)'\n"
        ),
        "moments" | "lyapunov" => format!(
            "set xlabel 't'\nset ylabel 'moment'\nset logscale y\nplot '{csv}' every ::1 using 1:2:3 with yerrorbars title 'E|u|^p'\n"
        ),
        "increments" | "verify" => format!(
            "set logscale xy\nset xlabel 'lag'\nplot '{csv}' every ::1 using 1:2:3 with yerrorbars title 'empirical', '' every ::1 using 1:4 with linespoints title 'bound'\n"
        ),
        "holder" => format!(
            "set logscale xy\nset xlabel 'lag'\nplot '{csv}' every ::1 using 1:2:3 with yerrorbars title 'empirical', '' every ::1 using 1:4 with lines title 'fit'\n"
        ),
        "bounds" => format!("set style data histograms\nplot '{csv}' every ::1::3 using 2:xtic(1) title 'bound parts'\n"),
        _ => format!("plot '{csv}' every ::1 using 1:2\n"),
    };
    format!("{HEADER}set title '{command}'\n{body}pause -1\n")
}
