"""
Views for the saliency engine web surface.

Views included:
    home: Registered model artifacts and the latest benchmark reports
    artifact_detail: Layer table and benchmark history of one artifact
    visualize: Upload an image and render VisualBackProp and LRP masks

Masks and overlays are rendered to PNG with Pillow and embedded in the page
as data URIs, so nothing is written to disk.
"""

import base64
import logging

from django.contrib import messages
from django.shortcuts import get_object_or_404, render

from .exceptions import ManifestError, SaliencyError
from .forms import VisualizeForm
from .imaging import encode_png, mask_to_image, overlay_red, to_grayscale, to_input_tensor
from .lrp import LrpConfig, lrp_relevance
from .models import BenchRecord, ModelArtifact
from .similarity import compare_masks
from .visualbackprop import visualbackprop

logger = logging.getLogger(__name__)


def png_data_uri(img):
    return "data:image/png;base64," + base64.b64encode(encode_png(img)).decode("ascii")


def home(request):
    """
    Display registered artifacts and recent benchmarks.

    Args:
        request (HttpRequest): The HTTP request object

    Returns:
        HttpResponse: Rendered home page
    """
    context = {
        'artifacts': ModelArtifact.objects.all(),
        'bench_records': BenchRecord.objects.select_related('artifact')[:20],
    }
    return render(request, 'saliency/home.html', context)


def artifact_detail(request, artifact_id):
    """
    Display the layer table and benchmark history of one artifact.

    A manifest that no longer loads is reported with a message instead of
    the layer table.

    Args:
        request (HttpRequest): The HTTP request object
        artifact_id (int): Primary key of the artifact

    Returns:
        HttpResponse: Rendered artifact page, or 404 for an unknown id
    """
    artifact = get_object_or_404(ModelArtifact, id=artifact_id)
    layers = None
    try:
        model = artifact.load()
        layers = model.summary()
    except (ManifestError, OSError) as exc:
        messages.error(request, f"Could not load {artifact.name}: {exc}")
    context = {
        'artifact': artifact,
        'layers': layers,
        'bench_records': artifact.bench_records.all(),
    }
    return render(request, 'saliency/artifact_detail.html', context)


def _render_masks(model, image, method, lrp_config, show_intermediates):
    x = to_input_tensor(image)
    vbp = visualbackprop(model, x, keep_intermediates=show_intermediates)
    lrp = lrp_relevance(model, x, lrp_config)
    chosen = vbp if method == 'vbp' else lrp.mask
    gray = to_grayscale(image)
    result = {
        'method': method,
        'mask_png': png_data_uri(mask_to_image(chosen)),
        'overlay_png': png_data_uri(overlay_red(gray, chosen)),
        'output_index': lrp.output_index,
        'similarity': compare_masks(vbp, lrp.mask).as_dict(),
        'stages': [],
    }
    if show_intermediates and vbp.intermediates:
        for level, stage_mask in enumerate(vbp.intermediates, start=1):
            result['stages'].append({
                'level': level,
                'shape': stage_mask.shape,
                'png': png_data_uri(mask_to_image(_stretch(stage_mask))),
            })
    return result


def _stretch(values):
    # viewing only; stored intermediates keep their scale
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return values * 0.0
    return (values - low) / (high - low)


def visualize(request):
    """
    Handle mask computation for an uploaded image.

    GET: Display the form
    POST: Validate the upload, run both methods, render the chosen mask, its
    red overlay, optional VisualBackProp stages and VBP-vs-LRP agreement

    Args:
        request (HttpRequest): The HTTP request object

    Returns:
        HttpResponse: Rendered form, with results on a successful POST
    """
    result = None
    if request.method == 'POST':
        form = VisualizeForm(request.POST, request.FILES)
        if form.is_valid():
            data = form.cleaned_data
            lrp_config = LrpConfig(epsilon=data['epsilon'], output_index=data['output_index'])
            try:
                result = _render_masks(data['model'], data['image'], data['method'],
                                       lrp_config, data['show_intermediates'])
            except SaliencyError as exc:
                logger.warning("visualize failed for %s: %s", data['artifact'].name, exc)
                messages.error(request, f"Could not compute the mask: {exc}")
            else:
                result['artifact'] = data['artifact']
    else:
        form = VisualizeForm()
    return render(request, 'saliency/visualize.html', {'form': form, 'result': result})
