#include <CLI11.hpp>

#include "commands.hpp"

using namespace itself::cli;

namespace {

void add_config(CLI::App* cmd, ConfigSource& src) {
    cmd->add_option("--config,-c", src.path, "key=value configuration file");
    cmd->add_option("--preset,-p", src.preset, "built-in preset (ecssd, dut_omron, icoseg, msra10k, lungs, parasites)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"itself: iterative saliency estimation with object-based superpixels"};
    app.require_subcommand(1);

    SaliencyArgs sal;
    auto* s = app.add_subcommand("saliency", "estimate the saliency map of one image");
    s->add_option("image", sal.image)->required();
    s->add_option("--out,-o", sal.out)->required();
    s->add_option("--scribbles", sal.scribbles, "mask: 0 unlabeled, 1 background, 2 object");
    s->add_option("--trace", sal.trace, "directory for per-iteration maps, overlays and prior heat maps");
    add_config(s, sal.config);

    BatchArgs batch;
    auto* b = app.add_subcommand("batch", "estimate saliency for every image of a directory");
    b->add_option("images", batch.images)->required();
    b->add_option("--out,-o", batch.out)->required();
    b->add_option("--scribbles", batch.scribbles, "directory of scribble masks named after the images");
    b->add_option("--jobs,-j", batch.jobs)->check(CLI::PositiveNumber);
    add_config(b, batch.config);

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "score saliency maps against ground truth");
    e->add_option("maps", ev.maps)->required();
    e->add_option("gt", ev.gt)->required();
    e->add_option("--out,-o", ev.out, "CSV file (stdout when omitted)");

    SuperpixelArgs sp;
    int sp_n = 0;
    auto* su = app.add_subcommand("superpixels", "write the object-based superpixel segmentation");
    su->add_option("image", sp.image)->required();
    su->add_option("--out,-o", sp.out)->required();
    auto* n_opt = su->add_option("--n", sp_n, "number of superpixels");
    add_config(su, sp.config);

    PriorArgs pr;
    auto* p = app.add_subcommand("priors", "dump prior heat maps");
    p->add_option("image", pr.image)->required();
    p->add_option("--out,-o", pr.out)->required();
    p->add_option("--scribbles", pr.scribbles);
    add_config(p, pr.config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kBadConfig;
    }

    if (s->parsed()) return cmd_saliency(sal);
    if (b->parsed()) return cmd_batch(batch);
    if (e->parsed()) return cmd_evaluate(ev);
    if (su->parsed()) {
        if (n_opt->count()) sp.n = sp_n;
        return cmd_superpixels(sp);
    }
    if (p->parsed()) return cmd_priors(pr);
    return kBadConfig;
}
